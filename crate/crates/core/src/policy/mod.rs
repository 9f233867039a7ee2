//! Finite-memory policies, valued policies on the augmented model, and the
//! compatibility certifier.

mod compat;
mod io;
mod valued;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use crate::formula::{canonical_valuation, Formula};
use crate::frontier::{PointId, ValueVector, WitnessRecord};
use crate::model::{check_action_distribution, mixed_successors, ActionId, History, Mdp, StateId};
use crate::reachability::SafeSet;

pub use compat::{
    certify_coherence, check_compatibility, check_path_compatibility, check_state_compatibility,
    Certificate, CertificateClause, CertificateNode, Clause, CompatReport, Violation,
    COMPAT_SLACK, DEFAULT_REACH_CAP,
};
pub use io::{policy_from_json, policy_to_json, PolicyFile};
pub use valued::{AugmentedState, ProjectedPolicy, ValuedEntry, ValuedPolicy};

pub type MemId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("point {0:?} has no witness")]
    MissingWitness(PointId),
    #[error("witness of point {point:?} references a point at state {found}, expected {expected}")]
    WitnessState {
        point: PointId,
        expected: StateId,
        found: StateId,
    },
    #[error("invalid policy: {0}")]
    Invalid(String),
    #[error("history is not realizable: {0}")]
    Unrealizable(String),
    #[error("policy file: {0}")]
    File(String),
    #[error("reachable augmented states exceed the cap of {0}")]
    TooLarge(usize),
    #[error("the valued policy has no initial choice")]
    NoInitialChoice,
    #[error("certification refused: {count} violation(s), first: {first}")]
    Refused { count: usize, first: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    /// Every counter is zero, or there are none: any action will do.
    Atomic,
    /// Keep to a safe set forever; counters do not change.
    SafeLock { safe: Arc<SafeSet> },
    /// Play `delta`, then move to the successor's recorded point.
    Recursive,
}

impl Mode {
    pub fn tag(&self) -> &'static str {
        match self {
            Mode::Atomic => "atomic",
            Mode::SafeLock { .. } => "safe_lock",
            Mode::Recursive => "recursive",
        }
    }
}

/// One memory state. Memory is anchored: each entry is only ever active at
/// `state`, so a memory state is exactly an augmented state `(s, mu, nu)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryState {
    pub state: StateId,
    pub mu: Vec<bool>,
    pub nu: Vec<f64>,
    pub mode: Mode,
    pub delta: Vec<(ActionId, f64)>,
    /// Memory after moving to each successor in the support of `delta`.
    pub next: Vec<(StateId, MemId)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMemoryPolicy {
    memory: Vec<MemoryState>,
    initial: MemId,
}

impl FiniteMemoryPolicy {
    /// Validates closure: every delta is a distribution over the anchor's
    /// actions and every successor has an update to a memory anchored there.
    pub fn new(m: &Mdp, memory: Vec<MemoryState>, initial: MemId) -> Result<Self, PolicyError> {
        if initial >= memory.len() {
            return Err(PolicyError::Invalid("initial memory out of range".into()));
        }
        for (k, mem) in memory.iter().enumerate() {
            if mem.state >= m.num_states() {
                return Err(PolicyError::Invalid(format!("memory {k}: state out of range")));
            }
            check_action_distribution(m, mem.state, &mem.delta)
                .map_err(|e| PolicyError::Invalid(format!("memory {k}: {e}")))?;
            let succ = mixed_successors(m, mem.state, &mem.delta);
            let targets: Vec<StateId> = mem.next.iter().map(|e| e.0).collect();
            let support: Vec<StateId> = succ.iter().map(|e| e.0).collect();
            if targets != support {
                return Err(PolicyError::Invalid(format!(
                    "memory {k}: update covers {targets:?}, successors are {support:?}"
                )));
            }
            for &(t, nk) in &mem.next {
                if nk >= memory.len() || memory[nk].state != t {
                    return Err(PolicyError::Invalid(format!(
                        "memory {k}: update for state {t} is not anchored there"
                    )));
                }
            }
        }
        Ok(FiniteMemoryPolicy { memory, initial })
    }

    pub fn memory(&self) -> &[MemoryState] {
        &self.memory
    }

    pub fn initial_memory(&self) -> MemId {
        self.initial
    }

    pub fn initial_state(&self) -> StateId {
        self.memory[self.initial].state
    }

    /// The point achieved at the initial state.
    pub fn achieved(&self) -> (&[bool], &[f64]) {
        let mem = &self.memory[self.initial];
        (&mem.mu, &mem.nu)
    }

    pub fn action(&self, mem: MemId) -> &[(ActionId, f64)] {
        &self.memory[mem].delta
    }

    pub fn update(&self, mem: MemId, t: StateId) -> Option<MemId> {
        let next = &self.memory[mem].next;
        next.binary_search_by_key(&t, |e| e.0).ok().map(|i| next[i].1)
    }

    /// Replays a history and returns the action distribution at its end.
    pub fn decide(&self, h: &History) -> Result<&[(ActionId, f64)], PolicyError> {
        let states = h.states();
        if states[0] != self.initial_state() {
            return Err(PolicyError::Unrealizable("history does not start at the initial state".into()));
        }
        let mut mem = self.initial;
        for &t in &states[1..] {
            mem = self.update(mem, t).ok_or_else(|| {
                PolicyError::Unrealizable(format!("no update into state {t}"))
            })?;
        }
        Ok(self.action(mem))
    }

    pub fn to_valued(&self) -> ValuedPolicy {
        let entries = self
            .memory
            .iter()
            .map(|mem| ValuedEntry {
                aug: AugmentedState {
                    state: mem.state,
                    mu: mem.mu.clone(),
                    nu: mem.nu.clone(),
                },
                delta: mem.delta.clone(),
                theta: mem.next.clone(),
            })
            .collect();
        ValuedPolicy::new(entries, Some(self.initial))
    }
}

/// Canonical key of an augmented state.
type AugKey = (StateId, Vec<bool>, Vec<u64>);

fn aug_key(s: StateId, mu: &[bool], nu: &[f64]) -> AugKey {
    (s, mu.to_vec(), nu.iter().map(|x| x.to_bits()).collect())
}

enum Pending {
    Point(PointId),
    Lock(Arc<SafeSet>),
    Atomic,
}

struct Builder<'a> {
    m: &'a Mdp,
    f: &'a Formula,
    memory: Vec<MemoryState>,
    index: HashMap<AugKey, MemId>,
    queue: VecDeque<(MemId, Pending)>,
}

impl Builder<'_> {
    fn intern(&mut self, s: StateId, mu: Vec<bool>, nu: Vec<f64>, job: Pending) -> MemId {
        let key = aug_key(s, &mu, &nu);
        if let Some(&k) = self.index.get(&key) {
            return k;
        }
        let k = self.memory.len();
        self.memory.push(MemoryState {
            state: s,
            mu,
            nu,
            mode: Mode::Atomic,
            delta: Vec::new(),
            next: Vec::new(),
        });
        self.index.insert(key, k);
        self.queue.push_back((k, job));
        k
    }

    /// Fixed counters from here on: a single action, memory follows the state.
    fn hold(&mut self, k: MemId, mode: Mode, action: ActionId, job: impl Fn() -> Pending) {
        let s = self.memory[k].state;
        let nu = self.memory[k].nu.clone();
        let delta = vec![(action, 1.0)];
        let mut next = Vec::new();
        for (t, _) in mixed_successors(self.m, s, &delta) {
            let m = self.m;
            let mu = canonical_valuation(self.f, &|a| m.has_label(t, a), &nu);
            next.push((t, self.intern(t, mu, nu.clone(), job())));
        }
        let mem = &mut self.memory[k];
        mem.mode = mode;
        mem.delta = delta;
        mem.next = next;
    }
}

/// Walks the witness records below `root` and builds the finite-memory
/// policy realizing that point.
pub fn extract_policy(
    m: &Mdp,
    f: &Formula,
    v: &ValueVector,
    root: PointId,
) -> Result<FiniteMemoryPolicy, PolicyError> {
    let mut b = Builder {
        m,
        f,
        memory: Vec::new(),
        index: HashMap::new(),
        queue: VecDeque::new(),
    };
    let p = v.point(root);
    let initial = b.intern(v.point_state(root), p.mu.clone(), p.nu.clone(), Pending::Point(root));

    while let Some((k, job)) = b.queue.pop_front() {
        let s = b.memory[k].state;
        match job {
            Pending::Atomic => b.hold(k, Mode::Atomic, 0, || Pending::Atomic),
            Pending::Lock(safe) => {
                let a = safe.safe_action.get(s).copied().flatten().ok_or_else(|| {
                    PolicyError::Invalid(format!(
                        "safe lock reached state '{}' outside its set",
                        m.state_name(s)
                    ))
                })?;
                let mode = Mode::SafeLock { safe: safe.clone() };
                b.hold(k, mode, a, || Pending::Lock(safe.clone()));
            }
            Pending::Point(pid) => {
                let point = v.point(pid);
                match point.witness.as_ref().ok_or(PolicyError::MissingWitness(pid))? {
                    WitnessRecord::Zero | WitnessRecord::TerminalOne => {
                        b.hold(k, Mode::Atomic, 0, || Pending::Atomic)
                    }
                    WitnessRecord::SafeSet { safe } => {
                        b.queue.push_front((k, Pending::Lock(safe.clone())))
                    }
                    WitnessRecord::Recursive { delta, successors } => {
                        let mut next = Vec::with_capacity(successors.len());
                        for &(t, q) in successors {
                            let found = v.point_state(q);
                            if found != t {
                                return Err(PolicyError::WitnessState {
                                    point: pid,
                                    expected: t,
                                    found,
                                });
                            }
                            let qp = v.point(q);
                            next.push((t, b.intern(t, qp.mu.clone(), qp.nu.clone(), Pending::Point(q))));
                        }
                        let mem = &mut b.memory[k];
                        mem.mode = Mode::Recursive;
                        mem.delta = delta.clone();
                        mem.next = next;
                    }
                }
            }
        }
    }
    FiniteMemoryPolicy::new(m, b.memory, initial)
}

/// Number of memory states per mode tag.
pub fn mode_counts(p: &FiniteMemoryPolicy) -> BTreeMap<&'static str, usize> {
    let mut out = BTreeMap::new();
    for mem in p.memory() {
        *out.entry(mem.mode.tag()).or_insert(0) += 1;
    }
    out
}
