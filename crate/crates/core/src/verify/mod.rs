//! Ground truth: exact evaluation on finite chains, scalar max-safety value
//! iteration, the product chain of a finite-memory policy, and Monte-Carlo
//! estimates.

mod exact;
mod linalg;
mod simulate;

use serde::Serialize;
use thiserror::Error;

use crate::formula::{
    eval_boolean, parse_formula, Formula, FormulaError, Fragment, NodeId, PathId,
};
use crate::model::{
    mixed_successors, thm1_chain, MarkovChain, Mdp, MemorylessPolicy, ModelError, StateId,
};
use crate::policy::{FiniteMemoryPolicy, MemId};
use crate::reachability::almost_sure_globally_set;

pub use exact::{exact_check, until_probabilities, weak_until_probabilities};
pub use linalg::{solve_dense, tarjan_scc, RESIDUAL_TOLERANCE};
pub use simulate::{simulate, wilson_interval, SimEstimate, WILSON_Z99};

/// The formula of the expressivity witness chain.
pub const THM1_FORMULA: &str = "P>=1 [c W P>=1/2 [c W (c & a)]]";
/// Cap on product-chain transitions.
pub const PRODUCT_TRANSITION_CAP: usize = 10_000_000;
/// Absolute accuracy of [`max_safety_vi`].
pub const SAFETY_VI_TOLERANCE: f64 = 1e-10;
/// Slack when comparing product-chain values with claimed counters.
pub const VALUE_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("singular linear system of size {size}")]
    Singular { size: usize },
    #[error("linear solve residual {residual} exceeds tolerance")]
    Residual { residual: f64 },
    #[error("formula atom '{0}' is not declared by the model")]
    UnknownAtom(String),
    #[error("product chain exceeds {cap} transitions")]
    ProductTooLarge { cap: usize },
    #[error("model is not a Markov chain: state '{0}' has several actions")]
    NotAChain(String),
    #[error("policy: {0}")]
    Policy(String),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Truth of every state subformula and probability of every path
/// subformula, per state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub root: NodeId,
    /// `per_state[node][state]`.
    pub per_state: Vec<Vec<bool>>,
    /// `per_path[path][state]`.
    pub per_path: Vec<Vec<f64>>,
}

impl CheckResult {
    pub fn satisfied(&self, s: StateId) -> bool {
        self.per_state[self.root][s]
    }

    pub fn holds(&self, node: NodeId, s: StateId) -> bool {
        self.per_state[node][s]
    }

    pub fn probability(&self, j: PathId, s: StateId) -> f64 {
        self.per_path[j][s]
    }

    /// States satisfying `node`.
    pub fn sat_set(&self, node: NodeId) -> Vec<StateId> {
        (0..self.per_state[node].len())
            .filter(|&s| self.per_state[node][s])
            .collect()
    }

    /// Probabilities of every path subformula at `s`.
    pub fn profile(&self, s: StateId) -> Vec<f64> {
        self.per_path.iter().map(|p| p[s]).collect()
    }
}

/// Path-subformula probabilities at `s` under the chain.
pub fn profile(chain: &MarkovChain, f: &Formula, s: StateId) -> Result<Vec<f64>, VerifyError> {
    Ok(exact_check(chain, f)?.profile(s))
}

fn chain_of(m: &Mdp) -> Result<MarkovChain, VerifyError> {
    m.as_chain().ok_or_else(|| {
        let s = (0..m.num_states())
            .find(|&s| m.actions(s).len() > 1)
            .unwrap_or(0);
        VerifyError::NotAChain(m.state_name(s).to_string())
    })
}

/// Exact check of a model in which every state has a single action.
pub fn check_chain_model(m: &Mdp, f: &Formula) -> Result<CheckResult, VerifyError> {
    exact_check(&chain_of(m)?, f)
}

/// Whether the witness chain with parameters `(alpha, eps)` satisfies
/// `P>=1 [c W P>=1/2 [c W (c & a)]]` at its root.
pub fn check_thm1_chain(alpha: f64, eps: f64) -> Result<bool, VerifyError> {
    let m = thm1_chain(alpha, eps)?;
    let f = parse_formula(THM1_FORMULA, Fragment::SafePctl)?;
    let r = check_chain_model(&m, &f)?;
    Ok(r.satisfied(m.initial()))
}

/// Maximal probability of staying forever in a set, per state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SafetyValues {
    pub values: Vec<f64>,
    pub iterations: usize,
    /// Largest remaining gap between the lower and upper iterates.
    pub gap: f64,
}

fn bellman_safety(m: &Mdp, safe: &[bool], v: &[f64], out: &mut [f64]) {
    for s in 0..m.num_states() {
        out[s] = if !safe[s] {
            0.0
        } else {
            m.actions(s)
                .iter()
                .map(|a| a.transitions.iter().map(|&(t, p)| p * v[t]).sum::<f64>())
                .fold(0.0, f64::max)
                .min(1.0)
        };
    }
}

/// Interval value iteration for `sup_pi P(G safe)`: the lower iterate starts
/// from the almost-sure set, the upper from the indicator of `safe`.
pub fn max_safety_vi_set(m: &Mdp, safe: &[bool]) -> SafetyValues {
    let n = m.num_states();
    let sure = almost_sure_globally_set(m, safe);
    let mut lo: Vec<f64> = (0..n).map(|s| if sure.contains(s) { 1.0 } else { 0.0 }).collect();
    let mut hi: Vec<f64> = (0..n).map(|s| if safe[s] { 1.0 } else { 0.0 }).collect();
    let mut buf = vec![0.0; n];
    let mut iterations = 0;
    let gap = |lo: &[f64], hi: &[f64]| {
        lo.iter()
            .zip(hi)
            .map(|(a, b)| b - a)
            .fold(0.0, f64::max)
    };
    while gap(&lo, &hi) >= SAFETY_VI_TOLERANCE && iterations < 10_000_000 {
        bellman_safety(m, safe, &lo, &mut buf);
        std::mem::swap(&mut lo, &mut buf);
        bellman_safety(m, safe, &hi, &mut buf);
        std::mem::swap(&mut hi, &mut buf);
        iterations += 1;
    }
    let g = gap(&lo, &hi);
    SafetyValues {
        values: lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect(),
        iterations,
        gap: g,
    }
}

/// [`max_safety_vi_set`] for the states satisfying a boolean formula.
pub fn max_safety_vi(m: &Mdp, safe: &Formula) -> Result<SafetyValues, VerifyError> {
    let mut set = Vec::with_capacity(m.num_states());
    for s in 0..m.num_states() {
        set.push(eval_boolean(safe, &|a| m.has_label(s, a))?);
    }
    Ok(max_safety_vi_set(m, &set))
}

/// The deterministic policy that is greedy for the given safety values;
/// near-ties go to the lowest action index.
pub fn greedy_policy(m: &Mdp, values: &[f64]) -> MemorylessPolicy {
    let choice: Vec<usize> = (0..m.num_states())
        .map(|s| {
            let q: Vec<f64> = m
                .actions(s)
                .iter()
                .map(|a| a.transitions.iter().map(|&(t, p)| p * values[t]).sum())
                .collect();
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            q.iter().position(|&x| x >= best - 1e-12).unwrap_or(0)
        })
        .collect();
    MemorylessPolicy::deterministic(m, &choice).expect("greedy choice is a valid action")
}

/// The Markov chain over reachable memory states of a finite-memory policy.
/// Memory states are anchored to model states, so the product state is the
/// memory id alone; `memories[i]` is the memory of chain state `i`.
#[derive(Debug, Clone)]
pub struct ProductChain {
    pub chain: MarkovChain,
    pub memories: Vec<MemId>,
}

pub fn product_chain(m: &Mdp, p: &FiniteMemoryPolicy) -> Result<ProductChain, VerifyError> {
    let mem = p.memory();
    let mut id = vec![usize::MAX; mem.len()];
    let mut memories = vec![p.initial_memory()];
    id[p.initial_memory()] = 0;
    let mut rows = Vec::new();
    let mut transitions = 0usize;
    let mut i = 0;
    while i < memories.len() {
        let k = memories[i];
        let s = mem[k].state;
        let mut row = Vec::new();
        for (t, pr) in mixed_successors(m, s, &mem[k].delta) {
            let nk = p.update(k, t).ok_or_else(|| {
                VerifyError::Policy(format!("memory {k} has no update for state {t}"))
            })?;
            if id[nk] == usize::MAX {
                id[nk] = memories.len();
                memories.push(nk);
            }
            row.push((id[nk], pr));
        }
        transitions += row.len();
        if transitions > PRODUCT_TRANSITION_CAP {
            return Err(VerifyError::ProductTooLarge {
                cap: PRODUCT_TRANSITION_CAP,
            });
        }
        rows.push(row);
        i += 1;
    }
    let names = memories
        .iter()
        .map(|&k| format!("{}#{k}", m.state_name(mem[k].state)))
        .collect();
    let labels = memories
        .iter()
        .map(|&k| m.labeling().indices(mem[k].state).to_vec())
        .collect();
    let chain = MarkovChain::new(names, rows, 0, m.atoms().to_vec(), labels)?;
    Ok(ProductChain { chain, memories })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueShortfall {
    pub memory: MemId,
    pub state: StateId,
    pub path: PathId,
    pub exact: f64,
    pub claimed: f64,
}

/// Exact check on the product chain.
#[derive(Debug, Clone)]
pub struct ProductCheck {
    pub product: ProductChain,
    pub result: CheckResult,
}

impl ProductCheck {
    /// Path probabilities from the initial memory state.
    pub fn initial_profile(&self) -> Vec<f64> {
        self.result.profile(0)
    }

    pub fn satisfied(&self) -> bool {
        self.result.satisfied(0)
    }

    /// Reachable memory states whose exact probabilities fall below their
    /// claimed counters by more than [`VALUE_SLACK`].
    pub fn shortfalls(&self, p: &FiniteMemoryPolicy) -> Vec<ValueShortfall> {
        let mut out = Vec::new();
        for (i, &k) in self.product.memories.iter().enumerate() {
            let mem = &p.memory()[k];
            for (j, &claimed) in mem.nu.iter().enumerate() {
                let exact = self.result.per_path[j][i];
                if exact < claimed - VALUE_SLACK {
                    out.push(ValueShortfall {
                        memory: k,
                        state: mem.state,
                        path: j,
                        exact,
                        claimed,
                    });
                }
            }
        }
        out
    }
}

pub fn product_chain_check(
    m: &Mdp,
    p: &FiniteMemoryPolicy,
    f: &Formula,
) -> Result<ProductCheck, VerifyError> {
    let product = product_chain(m, p)?;
    let result = exact_check(&product.chain, f)?;
    Ok(ProductCheck { product, result })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{example1, induce_chain};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn example1_fixed_policies() {
        let m = example1();
        let f = parse_formula("P>=2/3 [G P>=7/12 [G !a]]", Fragment::Cpctl).unwrap();
        let s0 = m.initial();
        let a1 = m.action_index(s0, "a1").unwrap();
        let mut choice = vec![0; m.num_states()];
        choice[s0] = a1;
        let pi1 = MemorylessPolicy::deterministic(&m, &choice).unwrap();
        let r = exact_check(&induce_chain(&m, &pi1), &f).unwrap();
        assert!(close(r.probability(0, s0), 0.75));
        assert!(close(r.probability(1, s0), 0.5));
        assert!(!r.satisfied(s0));
        choice[s0] = m.action_index(s0, "a4").unwrap();
        let pi2 = MemorylessPolicy::deterministic(&m, &choice).unwrap();
        let r = exact_check(&induce_chain(&m, &pi2), &f).unwrap();
        assert!(close(r.probability(1, s0), 2.0 / 3.0));
        assert!(r.satisfied(s0));
    }

    #[test]
    fn thm1_examples() {
        assert!(check_thm1_chain(0.5, 0.0).unwrap());
        assert!(!check_thm1_chain(1.0 / 3.0, 0.0).unwrap());
    }

    #[test]
    fn max_safety_on_example1() {
        let m = example1();
        let b = parse_formula("!a", Fragment::Cpctl).unwrap();
        let v = max_safety_vi(&m, &b).unwrap();
        assert!((v.values[m.initial()] - 0.75).abs() < 1e-9);
        let pi = greedy_policy(&m, &v.values);
        assert_eq!(pi.distribution(m.initial()), &[(m.action_index(0, "a1").unwrap(), 1.0)]);
        let t = parse_formula("true", Fragment::Cpctl).unwrap();
        assert!(max_safety_vi(&m, &t).unwrap().values.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn non_chain_models_are_rejected() {
        let m = example1();
        let f = parse_formula("a", Fragment::Cpctl).unwrap();
        assert!(matches!(check_chain_model(&m, &f), Err(VerifyError::NotAChain(_))));
    }
}
