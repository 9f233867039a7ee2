use super::linalg::{solve_dense, tarjan_scc};
use super::{CheckResult, VerifyError};
use crate::formula::{Formula, PathNode, StateNode, TIE_TOLERANCE};
use crate::model::{MarkovChain, StateId};

/// Exact probabilities of `a U b` from every state of a chain given by rows.
///
/// States with probability 0 or 1 are found on the graph first, so those
/// values are exact; the rest are solved one strongly connected block at a
/// time in reverse topological order.
pub fn until_probabilities(
    rows: &[Vec<(StateId, f64)>],
    a: &[bool],
    b: &[bool],
) -> Result<Vec<f64>, VerifyError> {
    let n = rows.len();
    let mut preds: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for (s, row) in rows.iter().enumerate() {
        for &(t, _) in row {
            preds[t].push(s);
        }
    }
    // States that can reach b through a-states.
    let mut can_reach = b.to_vec();
    let mut work: Vec<StateId> = (0..n).filter(|&s| b[s]).collect();
    while let Some(t) = work.pop() {
        for &s in &preds[t] {
            if !can_reach[s] && a[s] {
                can_reach[s] = true;
                work.push(s);
            }
        }
    }
    // States that can reach a probability-0 state while still undecided.
    let mut may_fail: Vec<bool> = can_reach.iter().map(|r| !r).collect();
    let mut work: Vec<StateId> = (0..n).filter(|&s| may_fail[s]).collect();
    while let Some(t) = work.pop() {
        for &s in &preds[t] {
            if !may_fail[s] && a[s] && !b[s] {
                may_fail[s] = true;
                work.push(s);
            }
        }
    }
    let mut x = vec![0.0; n];
    let mut maybe = vec![false; n];
    for s in 0..n {
        if can_reach[s] && !may_fail[s] {
            x[s] = 1.0;
        } else if can_reach[s] {
            maybe[s] = true;
        }
    }
    let comps = tarjan_scc(n, &maybe, &|v| rows[v].iter().map(|e| e.0).collect());
    let mut local = vec![usize::MAX; n];
    for comp in comps {
        let k = comp.len();
        for (i, &s) in comp.iter().enumerate() {
            local[s] = i;
        }
        let mut mat = vec![0.0; k * k];
        let mut rhs = vec![0.0; k];
        for (i, &s) in comp.iter().enumerate() {
            mat[i * k + i] = 1.0;
            for &(t, p) in &rows[s] {
                if local[t] != usize::MAX {
                    mat[i * k + local[t]] -= p;
                } else {
                    rhs[i] += p * x[t];
                }
            }
        }
        let sol = solve_dense(&mat, &rhs, k)?;
        for (i, &s) in comp.iter().enumerate() {
            x[s] = sol[i].clamp(0.0, 1.0);
            local[s] = usize::MAX;
        }
    }
    Ok(x)
}

/// Probability of `P(a W b)` per state.
pub fn weak_until_probabilities(
    rows: &[Vec<(StateId, f64)>],
    a: &[bool],
    b: &[bool],
) -> Result<Vec<f64>, VerifyError> {
    let hold: Vec<bool> = (0..a.len()).map(|s| a[s] && !b[s]).collect();
    let fail: Vec<bool> = (0..a.len()).map(|s| !a[s] && !b[s]).collect();
    let bad = until_probabilities(rows, &hold, &fail)?;
    Ok(bad.into_iter().map(|p| 1.0 - p).collect())
}

/// Bottom-up exact evaluation of every state and path subformula.
pub fn exact_check(chain: &MarkovChain, f: &Formula) -> Result<CheckResult, VerifyError> {
    for atom in f.atoms() {
        if chain.labeling().atom_index(&atom).is_none() {
            return Err(VerifyError::UnknownAtom(atom));
        }
    }
    let n = chain.num_states();
    let rows = chain.rows();
    let mut per_state: Vec<Vec<bool>> = Vec::with_capacity(f.sf());
    let mut per_path: Vec<Vec<f64>> = vec![Vec::new(); f.pf()];
    for node in f.nodes() {
        let sat: Vec<bool> = match node {
            StateNode::True => vec![true; n],
            StateNode::False => vec![false; n],
            StateNode::Atom(a) => (0..n).map(|s| chain.has_label(s, a)).collect(),
            StateNode::NegAtom(a) => (0..n).map(|s| !chain.has_label(s, a)).collect(),
            StateNode::And(l, r) => (0..n).map(|s| per_state[*l][s] && per_state[*r][s]).collect(),
            StateNode::Or(l, r) => (0..n).map(|s| per_state[*l][s] || per_state[*r][s]).collect(),
            StateNode::ProbGeq { threshold, path } => {
                let probs = match f.path(*path) {
                    PathNode::Next(a) => rows
                        .iter()
                        .map(|row| {
                            row.iter()
                                .filter(|e| per_state[a][e.0])
                                .map(|e| e.1)
                                .sum::<f64>()
                                .min(1.0)
                        })
                        .collect(),
                    PathNode::Until(a, b) => {
                        until_probabilities(rows, &per_state[a], &per_state[b])?
                    }
                    PathNode::WeakUntil(a, b) => {
                        weak_until_probabilities(rows, &per_state[a], &per_state[b])?
                    }
                    PathNode::ContinuingWeakUntil(a, b) => {
                        let goal: Vec<bool> =
                            (0..n).map(|s| per_state[a][s] && per_state[b][s]).collect();
                        weak_until_probabilities(rows, &per_state[a], &goal)?
                    }
                };
                let sat = probs.iter().map(|&q| q >= threshold - TIE_TOLERANCE).collect();
                per_path[*path] = probs;
                sat
            }
        };
        per_state.push(sat);
    }
    Ok(CheckResult {
        root: f.root(),
        per_state,
        per_path,
    })
}
