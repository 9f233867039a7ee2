use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{exact_check, product_chain, VerifyError};
use crate::formula::{Formula, PathId, PathNode};
use crate::model::Mdp;
use crate::policy::FiniteMemoryPolicy;

/// Two-sided 99% normal quantile.
pub const WILSON_Z99: f64 = 2.5758293035489;

const BATCH: usize = 4096;

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Interval estimate for one path subformula from the initial state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEstimate {
    pub path: PathId,
    pub samples: u64,
    pub successes: u64,
    pub failures: u64,
    /// Fraction of paths settled as satisfying.
    pub lower: f64,
    /// One minus the fraction settled as violating.
    pub upper: f64,
    /// Wilson 99% lower bound on `lower`'s expectation.
    pub lower_ci: f64,
    /// Wilson 99% upper bound on `upper`'s expectation.
    pub upper_ci: f64,
}

impl SimEstimate {
    pub fn contains(&self, x: f64) -> bool {
        self.lower_ci <= x && x <= self.upper_ci
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Settle {
    Open,
    Success,
    Failure,
}

/// Samples `n` paths of at most `horizon` steps on the policy's product
/// chain. Operand truth at each visited state is exact; a path settles on
/// success when it meets the goal or enters a state from which the held
/// operand is kept surely, and on failure when the held operand breaks.
pub fn simulate(
    m: &Mdp,
    p: &FiniteMemoryPolicy,
    f: &Formula,
    n: u64,
    horizon: usize,
    seed: u64,
) -> Result<Vec<SimEstimate>, VerifyError> {
    let product = product_chain(m, p)?;
    let chain = &product.chain;
    let truth = exact_check(chain, f)?;
    let rows = chain.rows();
    let size = rows.len();
    let cumulative: Vec<Vec<(usize, f64)>> = rows
        .iter()
        .map(|row| {
            let mut acc = 0.0;
            row.iter()
                .map(|&(t, pr)| {
                    acc += pr;
                    (t, acc)
                })
                .collect()
        })
        .collect();
    let step = |rng: &mut ChaCha8Rng, s: usize| {
        let row = &cumulative[s];
        let total = row.last().map_or(1.0, |e| e.1);
        let u: f64 = rng.gen::<f64>() * total;
        row.iter().find(|e| u < e.1).unwrap_or(&row[row.len() - 1]).0
    };
    // States from which every reachable state satisfies `held`.
    let sure_globally = |held: &[bool]| {
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); size];
        for (s, row) in rows.iter().enumerate() {
            for &(t, _) in row {
                preds[t].push(s);
            }
        }
        let mut bad: Vec<bool> = held.iter().map(|h| !h).collect();
        let mut work: Vec<usize> = (0..size).filter(|&s| bad[s]).collect();
        while let Some(t) = work.pop() {
            for &s in &preds[t] {
                if !bad[s] {
                    bad[s] = true;
                    work.push(s);
                }
            }
        }
        bad.into_iter().map(|b| !b).collect::<Vec<bool>>()
    };

    let mut out = Vec::with_capacity(f.pf());
    for j in 0..f.pf() {
        let path = f.path(j);
        let held = &truth.per_state[path.left()];
        let (goal, sure): (Vec<bool>, Vec<bool>) = match path {
            PathNode::ContinuingWeakUntil(l, r) => (
                (0..size).map(|s| truth.per_state[l][s] && truth.per_state[r][s]).collect(),
                sure_globally(held),
            ),
            PathNode::WeakUntil(_, r) => (truth.per_state[r].clone(), sure_globally(held)),
            PathNode::Until(_, r) => (truth.per_state[r].clone(), vec![false; size]),
            PathNode::Next(a) => (truth.per_state[a].clone(), vec![false; size]),
        };
        let classify = |s: usize, steps: usize| -> Settle {
            match path {
                PathNode::Next(_) => {
                    if steps == 0 {
                        Settle::Open
                    } else if goal[s] {
                        Settle::Success
                    } else {
                        Settle::Failure
                    }
                }
                _ => {
                    if goal[s] || sure[s] {
                        Settle::Success
                    } else if !held[s] {
                        Settle::Failure
                    } else {
                        Settle::Open
                    }
                }
            }
        };
        let batches = n.div_ceil(BATCH as u64);
        let (succ, fail) = (0..batches)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(b * f.pf() as u64 + j as u64);
                let count = (n - b * BATCH as u64).min(BATCH as u64);
                let (mut ok, mut bad) = (0u64, 0u64);
                for _ in 0..count {
                    let mut s = 0usize;
                    let mut steps = 0;
                    loop {
                        match classify(s, steps) {
                            Settle::Success => {
                                ok += 1;
                                break;
                            }
                            Settle::Failure => {
                                bad += 1;
                                break;
                            }
                            Settle::Open if steps >= horizon => break,
                            Settle::Open => {
                                s = step(&mut rng, s);
                                steps += 1;
                            }
                        }
                    }
                }
                (ok, bad)
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        let nn = n as f64;
        out.push(SimEstimate {
            path: j,
            samples: n,
            successes: succ,
            failures: fail,
            lower: succ as f64 / nn,
            upper: 1.0 - fail as f64 / nn,
            lower_ci: wilson_interval(succ, n, WILSON_Z99).0,
            upper_ci: wilson_interval(n - fail, n, WILSON_Z99).1,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(50, 100, WILSON_Z99);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((0.5 - lo - (hi - 0.5)).abs() < 1e-12);
        assert_eq!(wilson_interval(0, 10, WILSON_Z99).0, 0.0);
        assert_eq!(wilson_interval(10, 10, WILSON_Z99).1, 1.0);
    }
}
