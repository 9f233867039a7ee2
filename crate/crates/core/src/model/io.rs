use serde::{Deserialize, Serialize};

use super::{Mdp, ModelError, StateSpec};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    atoms: Vec<String>,
    initial: String,
    states: Vec<StateFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateFile {
    name: String,
    #[serde(default)]
    labels: Vec<String>,
    #[serde(default)]
    reward: f64,
    actions: Vec<ActionFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionFile {
    name: String,
    to: Vec<(String, Prob)>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Prob {
    Number(f64),
    Text(String),
}

fn parse_prob(text: &str) -> Option<f64> {
    let text = text.trim();
    match text.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().ok()?;
            let b: f64 = b.trim().parse().ok()?;
            (b != 0.0).then_some(a / b)
        }
        None => text.parse().ok(),
    }
}

pub fn load_model(bytes: &[u8]) -> Result<Mdp, ModelError> {
    let file: ModelFile =
        serde_json::from_slice(bytes).map_err(|e| ModelError::Schema(e.to_string()))?;
    let mut states = Vec::with_capacity(file.states.len());
    for s in file.states {
        let mut actions = Vec::with_capacity(s.actions.len());
        for a in s.actions {
            let mut to = Vec::with_capacity(a.to.len());
            for (t, p) in a.to {
                let p = match p {
                    Prob::Number(x) => x,
                    Prob::Text(text) => {
                        parse_prob(&text).ok_or_else(|| ModelError::BadProbability {
                            state: s.name.clone(),
                            action: a.name.clone(),
                            value: text.clone(),
                        })?
                    }
                };
                to.push((t, p));
            }
            actions.push((a.name, to));
        }
        states.push(StateSpec {
            name: s.name,
            labels: s.labels,
            reward: s.reward,
            actions,
        });
    }
    Mdp::new(file.atoms, &file.initial, states)
}

pub fn save_model(m: &Mdp) -> Vec<u8> {
    let file = ModelFile {
        atoms: m.atoms().to_vec(),
        initial: m.state_name(m.initial()).to_string(),
        states: (0..m.num_states())
            .map(|s| StateFile {
                name: m.state_name(s).to_string(),
                labels: m
                    .labeling()
                    .label_names(s)
                    .into_iter()
                    .map(String::from)
                    .collect(),
                reward: m.reward(s),
                actions: m
                    .actions(s)
                    .iter()
                    .map(|a| ActionFile {
                        name: a.name.clone(),
                        to: a
                            .transitions
                            .iter()
                            .map(|&(t, p)| (m.state_name(t).to_string(), Prob::Number(p)))
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut out = serde_json::to_vec_pretty(&file).expect("model serializes");
    out.push(b'\n');
    out
}
