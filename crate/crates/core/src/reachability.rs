//! Qualitative precomputation: almost-sure invariance and the initial
//! frontiers of value iteration.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::formula::{
    alit_holds, canonical_valuation, eval_boolean, Formula, FormulaError, PathId, PathNode,
    StateNode,
};
use crate::frontier::{prune_maximal, FrontierPoint, ValueVector, WitnessRecord};
use crate::model::{ActionId, Mdp, StateId};

/// A set of states that can be kept forever, with one closing action each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SafeSet {
    pub members: Vec<StateId>,
    /// Indexed by state; `Some` exactly for members.
    pub safe_action: Vec<Option<ActionId>>,
}

impl SafeSet {
    pub fn contains(&self, s: StateId) -> bool {
        self.safe_action[s].is_some()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Greatest `U` inside `allowed` where every member has an action with
/// support in `U`. The lowest-indexed such action is recorded.
pub fn almost_sure_globally_set(m: &Mdp, allowed: &[bool]) -> SafeSet {
    let n = m.num_states();
    // bad[s][a]: number of successors of (s, a) outside the current set.
    let mut bad: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            m.actions(s)
                .iter()
                .map(|a| a.transitions.iter().filter(|e| !allowed[e.0]).count())
                .collect()
        })
        .collect();
    let mut preds: Vec<Vec<(StateId, ActionId)>> = vec![Vec::new(); n];
    for s in 0..n {
        for (ai, a) in m.actions(s).iter().enumerate() {
            for &(t, _) in &a.transitions {
                preds[t].push((s, ai));
            }
        }
    }
    let mut inside = allowed.to_vec();
    let mut work: Vec<StateId> = (0..n)
        .rev()
        .filter(|&s| inside[s] && bad[s].iter().all(|&c| c > 0))
        .collect();
    for &s in &work {
        inside[s] = false;
    }
    while let Some(t) = work.pop() {
        for &(s, ai) in &preds[t] {
            bad[s][ai] += 1;
            if inside[s] && bad[s][ai] == 1 && bad[s].iter().all(|&c| c > 0) {
                inside[s] = false;
                work.push(s);
            }
        }
    }
    let safe_action: Vec<Option<ActionId>> = (0..n)
        .map(|s| {
            if inside[s] {
                bad[s].iter().position(|&c| c == 0)
            } else {
                None
            }
        })
        .collect();
    SafeSet {
        members: (0..n).filter(|&s| safe_action[s].is_some()).collect(),
        safe_action,
    }
}

/// [`almost_sure_globally_set`] for the states satisfying a boolean formula.
pub fn almost_sure_globally(m: &Mdp, b: &Formula) -> Result<SafeSet, FormulaError> {
    let mut allowed = Vec::with_capacity(m.num_states());
    for s in 0..m.num_states() {
        allowed.push(eval_boolean(b, &|a| m.has_label(s, a))?);
    }
    Ok(almost_sure_globally_set(m, &allowed))
}

/// Paths whose counters must be 1 whenever path `j`'s is: those reachable
/// from the held operand of `j` through conjunctions and held operands.
fn held_closure(f: &Formula, j: PathId) -> BTreeSet<PathId> {
    let mut out = BTreeSet::from([j]);
    let mut stack = vec![f.path(j).left()];
    while let Some(n) = stack.pop() {
        match f.node(n) {
            StateNode::And(a, b) => {
                stack.push(*a);
                stack.push(*b);
            }
            StateNode::ProbGeq { threshold, path } if *threshold > 0.0 && out.insert(*path) => {
                stack.push(f.path(*path).left());
            }
            _ => {}
        }
    }
    out
}

/// Candidate flag sets of the initial vector: closures of every subset of
/// paths (of singletons and the full set only, for wide formulas).
fn flag_sets(f: &Formula) -> Vec<BTreeSet<PathId>> {
    let pf = f.pf();
    let closures: Vec<BTreeSet<PathId>> = (0..pf).map(|j| held_closure(f, j)).collect();
    let mut out: BTreeSet<BTreeSet<PathId>> = BTreeSet::new();
    if pf <= 12 {
        for mask in 1u32..(1 << pf) {
            let mut set = BTreeSet::new();
            for (j, c) in closures.iter().enumerate() {
                if mask & (1 << j) != 0 {
                    set.extend(c.iter().copied());
                }
            }
            out.insert(set);
        }
    } else {
        out.extend(closures.iter().cloned());
        out.insert((0..pf).collect());
    }
    out.into_iter().collect()
}

/// Almost-sure-G sets for the held literal projections of each flag set.
pub fn flag_safe_sets(m: &Mdp, f: &Formula) -> Vec<(BTreeSet<PathId>, Arc<SafeSet>)> {
    flag_sets(f)
        .into_iter()
        .map(|set| {
            let allowed: Vec<bool> = (0..m.num_states())
                .map(|s| {
                    set.iter().all(|&j| {
                        let held = match f.path(j) {
                            PathNode::ContinuingWeakUntil(a, _)
                            | PathNode::WeakUntil(a, _)
                            | PathNode::Until(a, _)
                            | PathNode::Next(a) => a,
                        };
                        alit_holds(f, held, &|a| m.has_label(s, a))
                    })
                })
                .collect();
            let safe = Arc::new(almost_sure_globally_set(m, &allowed));
            (set, safe)
        })
        .collect()
}

/// The starting frontiers: counters in {0, 1}, with a 1 allowed only where
/// the held literal projections can be kept almost surely.
pub fn initial_value_vector(m: &Mdp, f: &Formula) -> ValueVector {
    let n = m.num_states();
    let pf = f.pf();
    let sets = flag_safe_sets(m, f);
    let mut all: Vec<(StateId, FrontierPoint)> = Vec::new();
    let mut per_state: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..n {
        let label = |a: &str| m.has_label(s, a);
        let mut pts = Vec::new();
        let zero = vec![0.0; pf];
        pts.push(FrontierPoint {
            mu: canonical_valuation(f, &label, &zero),
            nu: zero,
            witness: Some(if pf == 0 {
                WitnessRecord::TerminalOne
            } else {
                WitnessRecord::Zero
            }),
        });
        for (set, safe) in &sets {
            if !safe.contains(s) {
                continue;
            }
            let nu: Vec<f64> = (0..pf)
                .map(|j| if set.contains(&j) { 1.0 } else { 0.0 })
                .collect();
            pts.push(FrontierPoint {
                mu: canonical_valuation(f, &label, &nu),
                nu,
                witness: Some(WitnessRecord::SafeSet { safe: safe.clone() }),
            });
        }
        for p in prune_maximal(pts, 0.0, usize::MAX) {
            per_state[s].push(all.len());
            all.push((s, p));
        }
    }
    let mut v = ValueVector::new(n);
    let ids = v.push_chunk(all);
    for (s, idx) in per_state.into_iter().enumerate() {
        v.set_state(s, idx.into_iter().map(|i| ids[i]).collect());
    }
    v
}

/// Safe sets per path subformula, keyed by path index, for reporting.
pub fn safe_sets_by_path(m: &Mdp, f: &Formula) -> BTreeMap<PathId, Arc<SafeSet>> {
    let sets = flag_safe_sets(m, f);
    (0..f.pf())
        .filter_map(|j| {
            let c = held_closure(f, j);
            sets.iter()
                .find(|(s, _)| *s == c)
                .map(|(_, safe)| (j, safe.clone()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse_formula, Fragment};
    use crate::model::{example1, gridworld, SlipTiers};

    fn names(m: &Mdp, s: &SafeSet) -> Vec<String> {
        s.members.iter().map(|&x| m.state_name(x).to_string()).collect()
    }

    #[test]
    fn example1_not_a() {
        let m = example1();
        let b = parse_formula("!a", Fragment::Cpctl).unwrap();
        let safe = almost_sure_globally(&m, &b).unwrap();
        assert_eq!(names(&m, &safe), ["s2", "s5", "s7"]);
        let t = parse_formula("true", Fragment::Cpctl).unwrap();
        assert_eq!(almost_sure_globally(&m, &t).unwrap().len(), 9);
        let fl = parse_formula("false", Fragment::Cpctl).unwrap();
        assert!(almost_sure_globally(&m, &fl).unwrap().is_empty());
    }

    #[test]
    fn removal_propagates_backwards() {
        // s0 -> s1 -> bad; s0 also has a self-loop.
        let m = Mdp::new(
            vec!["bad".into()],
            "s0",
            vec![
                crate::model::StateSpec {
                    name: "s0".into(),
                    actions: vec![
                        ("go".into(), vec![("s1".into(), 1.0)]),
                        ("stay".into(), vec![("s0".into(), 1.0)]),
                    ],
                    ..Default::default()
                },
                crate::model::StateSpec {
                    name: "s1".into(),
                    actions: vec![("go".into(), vec![("s2".into(), 1.0)])],
                    ..Default::default()
                },
                crate::model::StateSpec {
                    name: "s2".into(),
                    labels: vec!["bad".into()],
                    actions: vec![("stay".into(), vec![("s2".into(), 1.0)])],
                    ..Default::default()
                },
            ],
        )
        .unwrap();
        let safe = almost_sure_globally_set(&m, &[true, true, false]);
        assert_eq!(safe.members, vec![0]);
        assert_eq!(safe.safe_action[0], Some(1));
    }

    #[test]
    fn goal_cell_gets_both_flags() {
        let m = gridworld(1, SlipTiers::default()).unwrap();
        let f = parse_formula("P>=0.9 [G P>=0.6 [!d W (!d & G)]]", Fragment::Cpctl).unwrap();
        let v = initial_value_vector(&m, &f);
        let goal = m.state_index("r0c3").unwrap();
        assert!(v.points(goal).any(|p| p.nu.iter().all(|&x| x == 1.0)));
        let wall_side = m.state_index("r2c0").unwrap();
        let pts: Vec<_> = v.points(wall_side).collect();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].nu.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn outer_flag_implies_inner_flag() {
        let m = example1();
        let f = parse_formula("P>=2/3 [G P>=7/12 [G !a]]", Fragment::Cpctl).unwrap();
        let v = initial_value_vector(&m, &f);
        for s in 0..m.num_states() {
            for p in v.points(s) {
                // Path 1 is the outer one; its flag needs the inner flag.
                assert!(p.nu[1] == 0.0 || p.nu[0] == 1.0, "{p:?}");
            }
        }
        let s2 = m.state_index("s2").unwrap();
        assert!(v.points(s2).any(|p| p.nu == [1.0, 1.0]));
    }
}
