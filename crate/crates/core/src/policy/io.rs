use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{FiniteMemoryPolicy, MemoryState, Mode, PolicyError};
use crate::formula::Formula;
use crate::model::Mdp;
use crate::reachability::SafeSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AchievedPoint {
    pub mu: Vec<bool>,
    pub nu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemoryFile {
    pub id: usize,
    pub state: String,
    pub mode: String,
    pub mu: Vec<bool>,
    pub nu: Vec<f64>,
    pub delta: Vec<(String, f64)>,
    pub update: Vec<(String, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safe_actions: Option<Vec<(String, String)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyFile {
    pub formula: String,
    pub initial_state: String,
    pub initial_memory: usize,
    pub achieved: AchievedPoint,
    pub memory: Vec<MemoryFile>,
}

pub fn policy_to_json(m: &Mdp, f: &Formula, p: &FiniteMemoryPolicy) -> Vec<u8> {
    let (mu, nu) = p.achieved();
    let file = PolicyFile {
        formula: f.to_string(),
        initial_state: m.state_name(p.initial_state()).to_string(),
        initial_memory: p.initial_memory(),
        achieved: AchievedPoint {
            mu: mu.to_vec(),
            nu: nu.to_vec(),
        },
        memory: p
            .memory()
            .iter()
            .enumerate()
            .map(|(id, mem)| MemoryFile {
                id,
                state: m.state_name(mem.state).to_string(),
                mode: mem.mode.tag().to_string(),
                mu: mem.mu.clone(),
                nu: mem.nu.clone(),
                delta: mem
                    .delta
                    .iter()
                    .map(|&(a, w)| (m.actions(mem.state)[a].name.clone(), w))
                    .collect(),
                update: mem
                    .next
                    .iter()
                    .map(|&(t, k)| (m.state_name(t).to_string(), k))
                    .collect(),
                safe_actions: match &mem.mode {
                    Mode::SafeLock { safe } => Some(
                        safe.members
                            .iter()
                            .map(|&s| {
                                let a = safe.safe_action[s].expect("member has an action");
                                (m.state_name(s).to_string(), m.actions(s)[a].name.clone())
                            })
                            .collect(),
                    ),
                    _ => None,
                },
            })
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&file).expect("policy serializes");
    out.push(b'\n');
    out
}

/// Reads a policy file against a model; returns the policy and the formula
/// text it was synthesized for.
pub fn policy_from_json(m: &Mdp, bytes: &[u8]) -> Result<(FiniteMemoryPolicy, String), PolicyError> {
    let file: PolicyFile =
        serde_json::from_slice(bytes).map_err(|e| PolicyError::File(e.to_string()))?;
    let state = |name: &str| {
        m.state_index(name)
            .ok_or_else(|| PolicyError::File(format!("unknown state '{name}'")))
    };
    let mut memory = Vec::with_capacity(file.memory.len());
    for (k, mf) in file.memory.iter().enumerate() {
        if mf.id != k {
            return Err(PolicyError::File(format!("memory ids must be dense, found {} at {k}", mf.id)));
        }
        let s = state(&mf.state)?;
        let action = |s, name: &str| {
            m.action_index(s, name).ok_or_else(|| {
                PolicyError::File(format!("unknown action '{name}' at state '{}'", m.state_name(s)))
            })
        };
        let mut delta = Vec::new();
        for (a, w) in &mf.delta {
            delta.push((action(s, a)?, *w));
        }
        delta.sort_by_key(|e| e.0);
        let mut next = Vec::new();
        for (t, nk) in &mf.update {
            next.push((state(t)?, *nk));
        }
        next.sort_by_key(|e| e.0);
        let mode = match mf.mode.as_str() {
            "atomic" => Mode::Atomic,
            "recursive" => Mode::Recursive,
            "safe_lock" => {
                let pairs = mf
                    .safe_actions
                    .as_ref()
                    .ok_or_else(|| PolicyError::File(format!("memory {k}: safe_lock needs safe_actions")))?;
                let mut safe_action = vec![None; m.num_states()];
                for (t, a) in pairs {
                    let t = state(t)?;
                    safe_action[t] = Some(action(t, a)?);
                }
                let members = (0..m.num_states()).filter(|&t| safe_action[t].is_some()).collect();
                Mode::SafeLock {
                    safe: Arc::new(SafeSet {
                        members,
                        safe_action,
                    }),
                }
            }
            other => return Err(PolicyError::File(format!("memory {k}: unknown mode '{other}'"))),
        };
        memory.push(MemoryState {
            state: s,
            mu: mf.mu.clone(),
            nu: mf.nu.clone(),
            mode,
            delta,
            next,
        });
    }
    let p = FiniteMemoryPolicy::new(m, memory, file.initial_memory)?;
    if m.state_name(p.initial_state()) != file.initial_state {
        return Err(PolicyError::File("initial_state disagrees with the initial memory".into()));
    }
    Ok((p, file.formula))
}
