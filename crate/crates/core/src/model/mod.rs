//! Finite labeled MDPs, Markov chains, histories and memoryless policies.

mod builtin;
mod gridworld;
mod io;

use std::collections::HashMap;

use thiserror::Error;

pub use builtin::{builtin_model, example1, thm1_chain};
pub use gridworld::{gridworld, SlipTiers};
pub use io::{load_model, save_model};

pub type StateId = usize;
/// Index into `A(s)` for a fixed state `s`.
pub type ActionId = usize;

/// Tolerance on the sum of a probability distribution.
pub const DIST_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model file: {0}")]
    Schema(String),
    #[error("state '{state}', action '{action}': probabilities sum to {sum}")]
    DistributionSum {
        state: String,
        action: String,
        sum: f64,
    },
    #[error("state '{state}', action '{action}': invalid probability {value}")]
    BadProbability {
        state: String,
        action: String,
        value: String,
    },
    #[error("unknown state '{0}'")]
    UnknownState(String),
    #[error("duplicate state '{0}'")]
    DuplicateState(String),
    #[error("state '{state}' uses undeclared atom '{atom}'")]
    UnknownAtom { state: String, atom: String },
    #[error("state '{0}' has no actions")]
    NoActions(String),
    #[error("model has no states")]
    Empty,
    #[error("policy: {0}")]
    InvalidPolicy(String),
    #[error("history: {0}")]
    InvalidHistory(String),
    #[error("unknown built-in model '{0}'")]
    UnknownBuiltin(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub name: String,
    /// Successors with positive probability, sorted by state id.
    pub transitions: Vec<(StateId, f64)>,
}

/// Atomic propositions and the per-state labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    atoms: Vec<String>,
    index: HashMap<String, usize>,
    labels: Vec<Vec<usize>>,
}

impl Labeling {
    fn new(atoms: Vec<String>, labels: Vec<Vec<usize>>) -> Self {
        let index = atoms.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        Labeling {
            atoms,
            index,
            labels,
        }
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn atom_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn has(&self, s: StateId, atom: &str) -> bool {
        self.index
            .get(atom)
            .is_some_and(|i| self.labels[s].binary_search(i).is_ok())
    }

    /// Atom indices of the label of `s`, sorted.
    pub fn indices(&self, s: StateId) -> &[usize] {
        &self.labels[s]
    }

    pub fn label_names(&self, s: StateId) -> Vec<&str> {
        self.labels[s].iter().map(|&i| self.atoms[i].as_str()).collect()
    }
}

/// A validated MDP. Rewards are carried along but never optimized.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    names: Vec<String>,
    name_index: HashMap<String, StateId>,
    actions: Vec<Vec<Action>>,
    initial: StateId,
    labeling: Labeling,
    rewards: Vec<f64>,
}

/// Unvalidated description of one state, used to build an [`Mdp`].
#[derive(Debug, Clone, Default)]
pub struct StateSpec {
    pub name: String,
    pub labels: Vec<String>,
    pub reward: f64,
    /// `(action name, [(successor name, probability)])`.
    pub actions: Vec<(String, Vec<(String, f64)>)>,
}

impl Mdp {
    pub fn new(
        atoms: Vec<String>,
        initial: &str,
        states: Vec<StateSpec>,
    ) -> Result<Mdp, ModelError> {
        if states.is_empty() {
            return Err(ModelError::Empty);
        }
        let mut name_index = HashMap::new();
        for (i, s) in states.iter().enumerate() {
            if name_index.insert(s.name.clone(), i).is_some() {
                return Err(ModelError::DuplicateState(s.name.clone()));
            }
        }
        let atom_index: HashMap<&str, usize> =
            atoms.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
        let mut labels = Vec::with_capacity(states.len());
        let mut actions = Vec::with_capacity(states.len());
        for s in &states {
            let mut l = Vec::new();
            for a in &s.labels {
                let i = *atom_index.get(a.as_str()).ok_or_else(|| ModelError::UnknownAtom {
                    state: s.name.clone(),
                    atom: a.clone(),
                })?;
                l.push(i);
            }
            l.sort_unstable();
            l.dedup();
            labels.push(l);
            if s.actions.is_empty() {
                return Err(ModelError::NoActions(s.name.clone()));
            }
            let mut acts = Vec::with_capacity(s.actions.len());
            for (aname, to) in &s.actions {
                let mut merged: Vec<(StateId, f64)> = Vec::with_capacity(to.len());
                for (t, p) in to {
                    if !p.is_finite() || *p < 0.0 {
                        return Err(ModelError::BadProbability {
                            state: s.name.clone(),
                            action: aname.clone(),
                            value: p.to_string(),
                        });
                    }
                    let tid = *name_index
                        .get(t)
                        .ok_or_else(|| ModelError::UnknownState(t.clone()))?;
                    merged.push((tid, *p));
                }
                merged.sort_by_key(|e| e.0);
                merged.dedup_by(|b, a| {
                    if a.0 == b.0 {
                        a.1 += b.1;
                        true
                    } else {
                        false
                    }
                });
                merged.retain(|e| e.1 > 0.0);
                let sum: f64 = merged.iter().map(|e| e.1).sum();
                if (sum - 1.0).abs() > DIST_TOLERANCE {
                    return Err(ModelError::DistributionSum {
                        state: s.name.clone(),
                        action: aname.clone(),
                        sum,
                    });
                }
                acts.push(Action {
                    name: aname.clone(),
                    transitions: merged,
                });
            }
            actions.push(acts);
        }
        let initial = *name_index
            .get(initial)
            .ok_or_else(|| ModelError::UnknownState(initial.to_string()))?;
        Ok(Mdp {
            names: states.iter().map(|s| s.name.clone()).collect(),
            name_index,
            actions,
            initial,
            labeling: Labeling::new(atoms, labels),
            rewards: states.iter().map(|s| s.reward).collect(),
        })
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.names[s]
    }

    pub fn state_index(&self, name: &str) -> Option<StateId> {
        self.name_index.get(name).copied()
    }

    pub fn actions(&self, s: StateId) -> &[Action] {
        &self.actions[s]
    }

    pub fn action_index(&self, s: StateId, name: &str) -> Option<ActionId> {
        self.actions[s].iter().position(|a| a.name == name)
    }

    pub fn atoms(&self) -> &[String] {
        self.labeling.atoms()
    }

    pub fn labeling(&self) -> &Labeling {
        &self.labeling
    }

    pub fn has_label(&self, s: StateId, atom: &str) -> bool {
        self.labeling.has(s, atom)
    }

    pub fn reward(&self, s: StateId) -> f64 {
        self.rewards[s]
    }

    pub fn num_transitions(&self) -> usize {
        self.actions
            .iter()
            .flat_map(|a| a.iter().map(|x| x.transitions.len()))
            .sum()
    }

    /// The chain obtained when every state has a single action.
    pub fn as_chain(&self) -> Option<MarkovChain> {
        if self.actions.iter().all(|a| a.len() == 1) {
            let pi = MemorylessPolicy::deterministic(self, &vec![0; self.num_states()]).ok()?;
            Some(induce_chain(self, &pi))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    names: Vec<String>,
    rows: Vec<Vec<(StateId, f64)>>,
    initial: StateId,
    labeling: Labeling,
}

impl MarkovChain {
    /// Builds a chain from raw rows; `labels` are atom indices per state.
    pub fn new(
        names: Vec<String>,
        rows: Vec<Vec<(StateId, f64)>>,
        initial: StateId,
        atoms: Vec<String>,
        labels: Vec<Vec<usize>>,
    ) -> Result<Self, ModelError> {
        let n = names.len();
        if n == 0 {
            return Err(ModelError::Empty);
        }
        if rows.len() != n || labels.len() != n || initial >= n {
            return Err(ModelError::InvalidParameter("chain dimensions disagree".into()));
        }
        let mut clean = Vec::with_capacity(n);
        for (s, row) in rows.into_iter().enumerate() {
            let mut row: Vec<_> = row.into_iter().filter(|e| e.1 > 0.0).collect();
            row.sort_by_key(|e| e.0);
            row.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            let sum: f64 = row.iter().map(|e| e.1).sum();
            if row.iter().any(|e| e.0 >= n) || (sum - 1.0).abs() > DIST_TOLERANCE {
                return Err(ModelError::DistributionSum {
                    state: names[s].clone(),
                    action: "-".into(),
                    sum,
                });
            }
            clean.push(row);
        }
        let mut labels = labels;
        for l in &mut labels {
            if l.iter().any(|&i| i >= atoms.len()) {
                return Err(ModelError::InvalidParameter("label index out of range".into()));
            }
            l.sort_unstable();
            l.dedup();
        }
        Ok(MarkovChain {
            names,
            rows: clean,
            initial,
            labeling: Labeling::new(atoms, labels),
        })
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.names[s]
    }

    pub fn row(&self, s: StateId) -> &[(StateId, f64)] {
        &self.rows[s]
    }

    pub fn rows(&self) -> &[Vec<(StateId, f64)>] {
        &self.rows
    }

    pub fn labeling(&self) -> &Labeling {
        &self.labeling
    }

    pub fn has_label(&self, s: StateId, atom: &str) -> bool {
        self.labeling.has(s, atom)
    }

    pub fn with_initial(mut self, s: StateId) -> Self {
        self.initial = s;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemorylessPolicy {
    per_state: Vec<Vec<(ActionId, f64)>>,
}

impl MemorylessPolicy {
    pub fn new(m: &Mdp, per_state: Vec<Vec<(ActionId, f64)>>) -> Result<Self, ModelError> {
        if per_state.len() != m.num_states() {
            return Err(ModelError::InvalidPolicy(format!(
                "expected {} states, got {}",
                m.num_states(),
                per_state.len()
            )));
        }
        for (s, dist) in per_state.iter().enumerate() {
            check_action_distribution(m, s, dist).map_err(ModelError::InvalidPolicy)?;
        }
        Ok(MemorylessPolicy { per_state })
    }

    pub fn deterministic(m: &Mdp, choice: &[ActionId]) -> Result<Self, ModelError> {
        Self::new(m, choice.iter().map(|&a| vec![(a, 1.0)]).collect())
    }

    pub fn uniform(m: &Mdp) -> Self {
        let per_state = (0..m.num_states())
            .map(|s| {
                let k = m.actions(s).len();
                (0..k).map(|a| (a, 1.0 / k as f64)).collect()
            })
            .collect();
        MemorylessPolicy { per_state }
    }

    pub fn distribution(&self, s: StateId) -> &[(ActionId, f64)] {
        &self.per_state[s]
    }
}

/// Checks that `dist` is a distribution over `A(s)`.
pub fn check_action_distribution(
    m: &Mdp,
    s: StateId,
    dist: &[(ActionId, f64)],
) -> Result<(), String> {
    let k = m.actions(s).len();
    let mut sum = 0.0;
    for &(a, p) in dist {
        if a >= k {
            return Err(format!("state '{}': action {a} out of range", m.state_name(s)));
        }
        if !p.is_finite() || p < 0.0 {
            return Err(format!("state '{}': invalid probability {p}", m.state_name(s)));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > DIST_TOLERANCE {
        return Err(format!(
            "state '{}': action probabilities sum to {sum}",
            m.state_name(s)
        ));
    }
    Ok(())
}

/// Successor distribution of `s` under an action distribution.
pub fn mixed_successors(m: &Mdp, s: StateId, dist: &[(ActionId, f64)]) -> Vec<(StateId, f64)> {
    let mut row: Vec<(StateId, f64)> = Vec::new();
    for &(a, w) in dist {
        if w <= 0.0 {
            continue;
        }
        for &(t, p) in &m.actions(s)[a].transitions {
            row.push((t, w * p));
        }
    }
    row.sort_by_key(|e| e.0);
    row.dedup_by(|b, a| {
        if a.0 == b.0 {
            a.1 += b.1;
            true
        } else {
            false
        }
    });
    row
}

pub fn induce_chain(m: &Mdp, pi: &MemorylessPolicy) -> MarkovChain {
    MarkovChain {
        names: m.names.clone(),
        rows: (0..m.num_states())
            .map(|s| mixed_successors(m, s, pi.distribution(s)))
            .collect(),
        initial: m.initial,
        labeling: m.labeling.clone(),
    }
}

/// A nonempty finite path prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct History {
    states: Vec<StateId>,
}

impl History {
    pub fn new(m: &Mdp, states: Vec<StateId>) -> Result<Self, ModelError> {
        if states.is_empty() {
            return Err(ModelError::InvalidHistory("empty history".into()));
        }
        for &s in &states {
            if s >= m.num_states() {
                return Err(ModelError::InvalidHistory(format!("state {s} out of range")));
            }
        }
        for w in states.windows(2) {
            let reachable = m.actions(w[0])
                .iter()
                .any(|a| a.transitions.iter().any(|&(t, _)| t == w[1]));
            if !reachable {
                return Err(ModelError::InvalidHistory(format!(
                    "no action leads from '{}' to '{}'",
                    m.state_name(w[0]),
                    m.state_name(w[1])
                )));
            }
        }
        Ok(History { states })
    }

    pub fn states(&self) -> &[StateId] {
        &self.states
    }

    pub fn last(&self) -> StateId {
        *self.states.last().expect("history is nonempty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}
