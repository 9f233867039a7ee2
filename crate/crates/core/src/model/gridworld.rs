use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Mdp, ModelError, StateSpec};

/// Total slip mass per column tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlipTiers {
    pub high: f64,
    pub medium: f64,
    pub low: f64,
    pub constant: f64,
}

impl Default for SlipTiers {
    fn default() -> Self {
        SlipTiers {
            high: 0.8,
            medium: 0.45,
            low: 0.1,
            constant: 0.3,
        }
    }
}

struct Layout {
    rows: usize,
    cols: usize,
    wall: BTreeSet<(usize, usize)>,
    /// Slip mass per column; `None` means the constant tier.
    column_slip: Vec<Option<f64>>,
}

fn layout(variant: u32, t: SlipTiers) -> Result<Layout, ModelError> {
    match variant {
        1 => Ok(Layout {
            rows: 7,
            cols: 7,
            wall: (1..=5).map(|r| (r, 3)).collect(),
            column_slip: vec![None, Some(t.high), Some(t.low), None, None, None, None],
        }),
        2 => Ok(Layout {
            rows: 10,
            cols: 9,
            wall: [1, 2, 3, 6, 7, 8].iter().map(|&r| (r, 4)).collect(),
            column_slip: vec![
                None,
                Some(t.high),
                Some(t.medium),
                Some(t.low),
                None,
                None,
                None,
                None,
                None,
            ],
        }),
        _ => Err(ModelError::InvalidParameter(format!(
            "gridworld variant must be 1 or 2, got {variant}"
        ))),
    }
}

const DIRECTIONS: [(&str, isize, isize); 4] =
    [("up", -1, 0), ("down", 1, 0), ("left", 0, -1), ("right", 0, 1)];

fn cell_name(r: usize, c: usize) -> String {
    format!("r{r}c{c}")
}

/// The wall gridworlds. Border columns are unsafe (`d`), the goal (`G`) sits
/// at the top of the middle column and the start at its bottom. Each move
/// action sends `1 - slip` to the intended neighbor and spreads `slip`
/// uniformly over all available neighbors, intended one included; wall and
/// off-grid neighbors are never available. Unsafe cells and the goal are
/// absorbing.
pub fn gridworld(variant: u32, tiers: SlipTiers) -> Result<Mdp, ModelError> {
    for (name, v) in [
        ("high", tiers.high),
        ("medium", tiers.medium),
        ("low", tiers.low),
        ("constant", tiers.constant),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(ModelError::InvalidParameter(format!(
                "slip tier {name} = {v} is outside [0, 1]"
            )));
        }
    }
    let g = layout(variant, tiers)?;
    let mid = g.cols / 2;
    let goal = (0, mid);
    let start = (g.rows - 1, mid);
    let open = |r: isize, c: isize| {
        r >= 0
            && c >= 0
            && (r as usize) < g.rows
            && (c as usize) < g.cols
            && !g.wall.contains(&(r as usize, c as usize))
    };
    let mut states = Vec::new();
    for r in 0..g.rows {
        for c in 0..g.cols {
            if g.wall.contains(&(r, c)) {
                continue;
            }
            let name = cell_name(r, c);
            let unsafe_cell = c == 0 || c == g.cols - 1;
            let mut labels = Vec::new();
            if unsafe_cell {
                labels.push("d".to_string());
            }
            if (r, c) == goal {
                labels.push("G".to_string());
            }
            let actions = if unsafe_cell || (r, c) == goal {
                vec![("stay".to_string(), vec![(name.clone(), 1.0)])]
            } else {
                let avail: Vec<(&str, String)> = DIRECTIONS
                    .iter()
                    .filter(|(_, dr, dc)| open(r as isize + dr, c as isize + dc))
                    .map(|(n, dr, dc)| {
                        let (tr, tc) = ((r as isize + dr) as usize, (c as isize + dc) as usize);
                        (*n, cell_name(tr, tc))
                    })
                    .collect();
                let slip = g.column_slip[c].unwrap_or(tiers.constant);
                let share = slip / avail.len() as f64;
                avail
                    .iter()
                    .map(|(dir, target)| {
                        let mut to = vec![(target.clone(), 1.0 - slip)];
                        to.extend(avail.iter().map(|(_, t)| (t.clone(), share)));
                        (dir.to_string(), to)
                    })
                    .collect()
            };
            states.push(StateSpec {
                name,
                labels,
                reward: 0.0,
                actions,
            });
        }
    }
    Mdp::new(
        vec!["G".into(), "d".into()],
        &cell_name(start.0, start.1),
        states,
    )
}
