//! Random models and formulas shared by the property and acceptance tests.
#![allow(dead_code)]

use cpctl::formula::{Formula, Fragment, PathExpr, StateExpr};
use cpctl::model::{Mdp, StateSpec};
use rand::seq::SliceRandom;
use rand::Rng;

pub const ATOMS: [&str; 3] = ["a", "b", "c"];

fn distribution<R: Rng>(rng: &mut R, n: usize, max_succ: usize) -> Vec<(String, f64)> {
    let k = rng.gen_range(1..=max_succ.min(n));
    let mut targets: Vec<usize> = (0..n).collect();
    targets.shuffle(rng);
    targets.truncate(k);
    // Small integer weights make exact ties with round thresholds common.
    let weights: Vec<u32> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
    let total: u32 = weights.iter().sum();
    targets
        .into_iter()
        .zip(weights)
        .map(|(t, w)| (format!("s{t}"), w as f64 / total as f64))
        .collect()
}

fn labels<R: Rng>(rng: &mut R) -> Vec<String> {
    ATOMS.iter().filter(|_| rng.gen_bool(0.5)).map(|a| a.to_string()).collect()
}

/// MDP with `n` states and 1..=`max_actions` actions per state.
pub fn random_mdp<R: Rng>(rng: &mut R, n: usize, max_actions: usize) -> Mdp {
    let states = (0..n)
        .map(|s| StateSpec {
            name: format!("s{s}"),
            labels: labels(rng),
            reward: 0.0,
            actions: (0..rng.gen_range(1..=max_actions))
                .map(|a| (format!("a{a}"), distribution(rng, n, 3)))
                .collect(),
        })
        .collect();
    Mdp::new(ATOMS.iter().map(|a| a.to_string()).collect(), "s0", states).expect("valid random MDP")
}

/// Single-action MDP, i.e. a labelled Markov chain.
pub fn random_chain<R: Rng>(rng: &mut R, n: usize) -> Mdp {
    random_mdp(rng, n, 1)
}

fn literal<R: Rng>(rng: &mut R) -> StateExpr {
    let a = ATOMS.choose(rng).unwrap();
    match rng.gen_range(0..6) {
        0 => StateExpr::True,
        1 | 2 => StateExpr::atom(a),
        _ => StateExpr::neg(a),
    }
}

fn threshold<R: Rng>(rng: &mut R) -> f64 {
    *[0.0, 0.25, 0.5, 0.75, 1.0, 0.3, 0.6, 0.9].choose(rng).unwrap()
}

/// CPCTL state formula of nesting depth at most `depth`.
pub fn random_state<R: Rng>(rng: &mut R, depth: usize) -> StateExpr {
    if depth == 0 {
        return literal(rng);
    }
    match rng.gen_range(0..5) {
        0 => literal(rng),
        1 => StateExpr::and(random_state(rng, depth - 1), random_state(rng, depth - 1)),
        _ => random_prob(rng, depth),
    }
}

/// `P>=p [l W (l & r)]` with operands of depth below `depth`.
pub fn random_prob<R: Rng>(rng: &mut R, depth: usize) -> StateExpr {
    let d = depth.saturating_sub(1);
    let r = if rng.gen_bool(0.25) {
        StateExpr::False
    } else {
        random_state(rng, d)
    };
    StateExpr::prob(threshold(rng), PathExpr::ContinuingWeakUntil(random_state(rng, d), r))
}

/// Random CPCTL formula whose root is a probabilistic operator.
pub fn random_cpctl<R: Rng>(rng: &mut R, depth: usize) -> Formula {
    Formula::from_expr(&random_prob(rng, depth.max(1)), Fragment::Cpctl).expect("generated CPCTL")
}
