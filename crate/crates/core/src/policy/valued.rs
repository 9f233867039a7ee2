use std::collections::HashMap;

use super::{aug_key, AugKey, PolicyError};
use crate::model::{ActionId, History, StateId};

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    pub state: StateId,
    pub mu: Vec<bool>,
    pub nu: Vec<f64>,
}

/// `Delta` and `Theta` at one augmented state. `theta` maps each successor
/// to the index of the augmented state chosen there.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuedEntry {
    pub aug: AugmentedState,
    pub delta: Vec<(ActionId, f64)>,
    pub theta: Vec<(StateId, usize)>,
}

/// A policy on the augmented model, deterministic in its valuation choices.
/// `initial` is the choice made at the pre-initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuedPolicy {
    entries: Vec<ValuedEntry>,
    initial: Option<usize>,
    index: HashMap<AugKey, usize>,
    duplicates: Vec<usize>,
}

impl ValuedPolicy {
    pub fn new(entries: Vec<ValuedEntry>, initial: Option<usize>) -> Self {
        let mut index = HashMap::new();
        let mut duplicates = Vec::new();
        for (k, e) in entries.iter().enumerate() {
            let key = aug_key(e.aug.state, &e.aug.mu, &e.aug.nu);
            if index.insert(key, k).is_some() {
                duplicates.push(k);
            }
        }
        ValuedPolicy {
            entries,
            initial,
            index,
            duplicates,
        }
    }

    pub fn entries(&self) -> &[ValuedEntry] {
        &self.entries
    }

    pub fn initial(&self) -> Option<usize> {
        self.initial
    }

    /// Entries whose augmented state repeats an earlier one.
    pub fn duplicates(&self) -> &[usize] {
        &self.duplicates
    }

    pub fn lookup(&self, aug: &AugmentedState) -> Option<usize> {
        self.index.get(&aug_key(aug.state, &aug.mu, &aug.nu)).copied()
    }

    /// Rebuilds with one entry replaced; the index follows the new key.
    pub fn with_entry(&self, k: usize, e: ValuedEntry) -> Self {
        let mut entries = self.entries.clone();
        entries[k] = e;
        ValuedPolicy::new(entries, self.initial)
    }

    pub fn project(&self) -> Result<ProjectedPolicy<'_>, PolicyError> {
        let initial = self.initial.ok_or(PolicyError::NoInitialChoice)?;
        Ok(ProjectedPolicy { vp: self, initial })
    }
}

/// A history-dependent policy on the original model, obtained by replaying
/// `Theta` along the history.
#[derive(Debug, Clone, Copy)]
pub struct ProjectedPolicy<'a> {
    vp: &'a ValuedPolicy,
    initial: usize,
}

impl ProjectedPolicy<'_> {
    /// Index of the augmented state reached after `h`.
    pub fn locate(&self, h: &History) -> Result<usize, PolicyError> {
        let states = h.states();
        let mut k = self.initial;
        if self.vp.entries[k].aug.state != states[0] {
            return Err(PolicyError::Unrealizable(
                "history does not start at the initial state".into(),
            ));
        }
        for (i, &t) in states.iter().enumerate().skip(1) {
            let theta = &self.vp.entries[k].theta;
            k = theta
                .iter()
                .find(|e| e.0 == t)
                .map(|e| e.1)
                .ok_or_else(|| {
                    PolicyError::Unrealizable(format!("step {i}: no choice for state {t}"))
                })?;
        }
        Ok(k)
    }

    pub fn decide(&self, h: &History) -> Result<&[(ActionId, f64)], PolicyError> {
        let k = self.locate(h)?;
        Ok(&self.vp.entries[k].delta)
    }
}
