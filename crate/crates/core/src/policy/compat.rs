use std::collections::VecDeque;
use std::fmt;

use serde::Serialize;

use super::{PolicyError, ValuedPolicy};
use crate::formula::{Formula, PathNode, StateNode};
use crate::model::{check_action_distribution, mixed_successors, Mdp, StateId};

/// Slack allowed on every inequality.
pub const COMPAT_SLACK: f64 = 1e-9;
pub const DEFAULT_REACH_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    /// `mu_j = 1` needs the counter to reach the threshold.
    StateThreshold,
    /// A literal valued 1 must hold in the state's label.
    StateLiteral,
    StateConjunction,
    StateDisjunction,
    StateFalse,
    /// `nu_j <= max(mu_l * sum, mu_l * mu_r)`.
    PathContinuingWeakUntil,
    /// `nu_j <= max(mu_l * sum, mu_r)`.
    PathWeakUntil,
    /// `nu_j <= sum of successor valuations of the operand`.
    PathNext,
    /// Until has no local certificate.
    PathUnsupported,
    CounterRange,
    Dimension,
    Delta,
    ThetaCoverage,
    ThetaState,
    DuplicateState,
}

impl Clause {
    pub fn is_state_clause(self) -> bool {
        matches!(
            self,
            Clause::StateThreshold
                | Clause::StateLiteral
                | Clause::StateConjunction
                | Clause::StateDisjunction
                | Clause::StateFalse
        )
    }

    pub fn is_path_clause(self) -> bool {
        matches!(
            self,
            Clause::PathContinuingWeakUntil
                | Clause::PathWeakUntil
                | Clause::PathNext
                | Clause::PathUnsupported
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub clause: Clause,
    pub entry: usize,
    pub state: StateId,
    pub state_name: String,
    /// Node id for state clauses, path id for path clauses, successor
    /// state for theta clauses.
    pub index: usize,
    pub value: f64,
    pub bound: f64,
}

impl Violation {
    pub fn slack(&self) -> f64 {
        self.bound - self.value
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} at state '{}' (entry {}, index {}): value {} against bound {}",
            self.clause, self.state_name, self.entry, self.index, self.value, self.bound
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateClause {
    pub entry: usize,
    pub path: usize,
    pub clause: Clause,
    pub nu: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CompatReport {
    /// Reachable entries in breadth-first order.
    pub reachable: Vec<usize>,
    pub violations: Vec<Violation>,
    pub clauses: Vec<CertificateClause>,
}

impl CompatReport {
    pub fn is_compatible(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Part {
    State,
    Path,
    Both,
}

fn explore(vp: &ValuedPolicy, n: usize, cap: usize) -> Result<Vec<usize>, PolicyError> {
    let init = vp.initial().ok_or(PolicyError::NoInitialChoice)?;
    let entries = vp.entries();
    if init >= entries.len() {
        return Err(PolicyError::NoInitialChoice);
    }
    let mut seen = vec![false; entries.len()];
    let mut order = Vec::new();
    let mut queue = VecDeque::from([init]);
    seen[init] = true;
    while let Some(k) = queue.pop_front() {
        order.push(k);
        if order.len() > cap {
            return Err(PolicyError::TooLarge(cap));
        }
        for &(t, nk) in &entries[k].theta {
            if nk < entries.len() && t < n && !seen[nk] {
                seen[nk] = true;
                queue.push_back(nk);
            }
        }
    }
    Ok(order)
}

fn check(
    m: &Mdp,
    f: &Formula,
    vp: &ValuedPolicy,
    cap: usize,
    part: Part,
) -> Result<CompatReport, PolicyError> {
    let n = m.num_states();
    let reachable = explore(vp, n, cap)?;
    let entries = vp.entries();
    let mut violations = Vec::new();
    let mut clauses = Vec::new();
    let dup: std::collections::HashSet<usize> = vp.duplicates().iter().copied().collect();
    for &k in &reachable {
        let e = &entries[k];
        let s = e.aug.state;
        let mut flag = |clause: Clause, index: usize, value: f64, bound: f64| {
            violations.push(Violation {
                clause,
                entry: k,
                state: s,
                state_name: if s < n { m.state_name(s).to_string() } else { format!("#{s}") },
                index,
                value,
                bound,
            })
        };
        if s >= n || e.aug.mu.len() != f.sf() || e.aug.nu.len() != f.pf() {
            flag(Clause::Dimension, 0, e.aug.nu.len() as f64, f.pf() as f64);
            continue;
        }
        if dup.contains(&k) {
            flag(Clause::DuplicateState, k, 1.0, 0.0);
        }
        let mu = &e.aug.mu;
        let nu = &e.aug.nu;
        for (j, &x) in nu.iter().enumerate() {
            if !(0.0..=1.0).contains(&x) {
                flag(Clause::CounterRange, j, x, 1.0);
            }
        }
        if part != Part::Path {
            for (i, node) in f.nodes().iter().enumerate() {
                if !mu[i] {
                    continue;
                }
                let b = |x: bool| if x { 1.0 } else { 0.0 };
                match node {
                    StateNode::True => {}
                    StateNode::False => flag(Clause::StateFalse, i, 1.0, 0.0),
                    StateNode::Atom(a) => {
                        if !m.has_label(s, a) {
                            flag(Clause::StateLiteral, i, 1.0, 0.0)
                        }
                    }
                    StateNode::NegAtom(a) => {
                        if m.has_label(s, a) {
                            flag(Clause::StateLiteral, i, 1.0, 0.0)
                        }
                    }
                    StateNode::And(l, r) => {
                        if !(mu[*l] && mu[*r]) {
                            flag(Clause::StateConjunction, i, 1.0, b(mu[*l] && mu[*r]))
                        }
                    }
                    StateNode::Or(l, r) => {
                        if !(mu[*l] || mu[*r]) {
                            flag(Clause::StateDisjunction, i, 1.0, 0.0)
                        }
                    }
                    StateNode::ProbGeq { threshold, path } => {
                        if nu[*path] < threshold - COMPAT_SLACK {
                            flag(Clause::StateThreshold, i, *threshold, nu[*path])
                        }
                    }
                }
            }
        }
        if part == Part::State {
            continue;
        }
        if let Err(_msg) = check_action_distribution(m, s, &e.delta) {
            flag(Clause::Delta, 0, e.delta.iter().map(|x| x.1).sum(), 1.0);
            continue;
        }
        let succ = mixed_successors(m, s, &e.delta);
        let mut chosen: Vec<Option<usize>> = Vec::with_capacity(succ.len());
        for &(t, _) in &succ {
            match e.theta.iter().find(|x| x.0 == t) {
                None => {
                    flag(Clause::ThetaCoverage, t, 0.0, 1.0);
                    chosen.push(None);
                }
                Some(&(_, nk)) => {
                    if nk >= entries.len()
                        || entries[nk].aug.state != t
                        || entries[nk].aug.nu.len() != f.pf()
                        || entries[nk].aug.mu.len() != f.sf()
                    {
                        flag(Clause::ThetaState, t, nk as f64, 0.0);
                        chosen.push(None);
                    } else {
                        chosen.push(Some(nk));
                    }
                }
            }
        }
        for j in 0..f.pf() {
            let sum_nu: f64 = succ
                .iter()
                .zip(&chosen)
                .filter_map(|(&(_, p), c)| c.map(|nk| p * entries[nk].aug.nu[j]))
                .sum();
            let b = |x: bool| if x { 1.0 } else { 0.0 };
            let (clause, bound) = match f.path(j) {
                PathNode::ContinuingWeakUntil(l, r) => (
                    Clause::PathContinuingWeakUntil,
                    (b(mu[l]) * sum_nu).max(b(mu[l] && mu[r])),
                ),
                PathNode::WeakUntil(l, r) => {
                    (Clause::PathWeakUntil, (b(mu[l]) * sum_nu).max(b(mu[r])))
                }
                PathNode::Next(a) => {
                    let sum_mu: f64 = succ
                        .iter()
                        .zip(&chosen)
                        .filter_map(|(&(_, p), c)| c.map(|nk| p * b(entries[nk].aug.mu[a])))
                        .sum();
                    (Clause::PathNext, sum_mu)
                }
                PathNode::Until(..) => (Clause::PathUnsupported, 0.0),
            };
            clauses.push(CertificateClause {
                entry: k,
                path: j,
                clause,
                nu: nu[j],
                bound,
            });
            if clause == Clause::PathUnsupported || nu[j] > bound + COMPAT_SLACK {
                flag(clause, j, nu[j], bound);
            }
        }
    }
    Ok(CompatReport {
        reachable,
        violations,
        clauses,
    })
}

/// State compatibility at every reachable augmented state.
pub fn check_state_compatibility(
    m: &Mdp,
    f: &Formula,
    vp: &ValuedPolicy,
) -> Result<CompatReport, PolicyError> {
    check(m, f, vp, DEFAULT_REACH_CAP, Part::State)
}

/// Path compatibility (and well-formedness of Delta and Theta) at every
/// reachable augmented state.
pub fn check_path_compatibility(
    m: &Mdp,
    f: &Formula,
    vp: &ValuedPolicy,
) -> Result<CompatReport, PolicyError> {
    check(m, f, vp, DEFAULT_REACH_CAP, Part::Path)
}

pub fn check_compatibility(
    m: &Mdp,
    f: &Formula,
    vp: &ValuedPolicy,
    cap: usize,
) -> Result<CompatReport, PolicyError> {
    check(m, f, vp, cap, Part::Both)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateNode {
    pub entry: usize,
    pub state: String,
    pub mu: Vec<bool>,
    pub nu: Vec<f64>,
    pub delta: Vec<(String, f64)>,
    pub theta: Vec<(String, usize)>,
}

/// The reachable augmented graph with every clause evaluated. Validity of
/// all clauses implies each reachable state satisfies its own bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub formula: String,
    pub initial: usize,
    /// Counters guaranteed at the initial state.
    pub bounds: Vec<f64>,
    pub nodes: Vec<CertificateNode>,
    pub clauses: Vec<CertificateClause>,
}

pub fn certify_coherence(
    m: &Mdp,
    f: &Formula,
    vp: &ValuedPolicy,
) -> Result<Certificate, PolicyError> {
    let report = check_compatibility(m, f, vp, DEFAULT_REACH_CAP)?;
    if let Some(first) = report.violations.first() {
        return Err(PolicyError::Refused {
            count: report.violations.len(),
            first: first.to_string(),
        });
    }
    let initial = vp.initial().ok_or(PolicyError::NoInitialChoice)?;
    let entries = vp.entries();
    let nodes = report
        .reachable
        .iter()
        .map(|&k| {
            let e = &entries[k];
            let s = e.aug.state;
            CertificateNode {
                entry: k,
                state: m.state_name(s).to_string(),
                mu: e.aug.mu.clone(),
                nu: e.aug.nu.clone(),
                delta: e
                    .delta
                    .iter()
                    .map(|&(a, p)| (m.actions(s)[a].name.clone(), p))
                    .collect(),
                theta: e
                    .theta
                    .iter()
                    .map(|&(t, nk)| (m.state_name(t).to_string(), nk))
                    .collect(),
            }
        })
        .collect();
    Ok(Certificate {
        formula: f.to_string(),
        initial,
        bounds: entries[initial].aug.nu.clone(),
        nodes,
        clauses: report.clauses,
    })
}
