//! Set-valued value iteration over per-state frontiers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{
    slater_transform, Formula, FormulaError, Fragment, PathId, PathNode, StateNode, Thresholds,
    TIE_TOLERANCE,
};
use crate::frontier::{
    mix_pair, prune_indices, Candidate, FrontierPoint, PointId, ValueVector, WitnessRecord,
};
use crate::model::{ActionId, Mdp, StateId};
use crate::reachability::initial_value_vector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Thinning resolution on counters.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Stop once no state's frontier moves by this much (Hausdorff, L-inf).
    pub convergence_delta: f64,
    /// Mixing grid: weights `k / w_mix`.
    pub w_mix: u32,
    pub max_points: usize,
    pub slater_margin: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            epsilon: 1e-3,
            max_iters: 100_000,
            convergence_delta: 1e-6,
            w_mix: 4,
            max_points: 64,
            slater_margin: 0.01,
        }
    }
}

impl EngineConfig {
    // Negated comparisons so that NaN fields are rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |msg: String| Err(EngineError::Config(msg));
        if !(self.epsilon > 0.0) || !(self.convergence_delta > 0.0) {
            return bad("epsilon and convergence delta must be positive".into());
        }
        if self.convergence_delta > self.epsilon {
            return bad(format!(
                "convergence delta {} exceeds epsilon {}",
                self.convergence_delta, self.epsilon
            ));
        }
        if self.max_iters == 0 || self.w_mix == 0 || self.max_points == 0 {
            return bad("iteration cap, mixing grid and point cap must be positive".into());
        }
        if !(self.slater_margin > 0.0) {
            return bad("slater margin must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("synthesis needs a CPCTL formula, got {0}")]
    NotCpctl(Fragment),
    #[error("formula atom '{0}' is not declared by the model")]
    UnknownAtom(String),
    #[error("value vector does not fit: {0}")]
    Dimension(String),
    #[error("engine configuration: {0}")]
    Config(String),
    #[error("objective path {0} is out of range")]
    Objective(PathId),
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VIStatus {
    TargetMet,
    ConvergedTargetUnmet,
    IterCap,
}

impl VIStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            VIStatus::TargetMet => 0,
            VIStatus::ConvergedTargetUnmet => 2,
            VIStatus::IterCap => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VIResult {
    pub status: VIStatus,
    pub frontiers: ValueVector,
    pub iterations: usize,
    /// A point at the initial state satisfying the formula, when one exists.
    pub target_point: Option<PointId>,
    /// Frontier change of the last step.
    pub last_change: f64,
    /// Whether every iterate was covered (within epsilon) by the next.
    pub monotone: bool,
}

/// Counters and valuation at a state from the raw successor sums: a counter
/// is 0 when its held operand fails here, 1 when its goal holds here, and
/// the raw sum otherwise. Nodes are resolved in order, so gates only read
/// shallower values.
pub fn evaluate_counters(
    f: &Formula,
    label: &dyn Fn(&str) -> bool,
    raw: &[f64],
) -> (Vec<bool>, Vec<f64>) {
    let mut mu = vec![false; f.sf()];
    let mut nu = vec![0.0; f.pf()];
    for (id, node) in f.nodes().iter().enumerate() {
        mu[id] = match node {
            StateNode::True => true,
            StateNode::False => false,
            StateNode::Atom(a) => label(a),
            StateNode::NegAtom(a) => !label(a),
            StateNode::And(l, r) => mu[*l] && mu[*r],
            StateNode::Or(l, r) => mu[*l] || mu[*r],
            StateNode::ProbGeq { threshold, path } => {
                let (l, r) = match f.path(*path) {
                    PathNode::ContinuingWeakUntil(l, r) => (l, r),
                    other => unreachable!("engine formulas are CPCTL, found {other:?}"),
                };
                let value = if !mu[l] {
                    0.0
                } else if mu[r] {
                    1.0
                } else {
                    raw[*path].clamp(0.0, 1.0)
                };
                nu[*path] = value;
                value >= threshold - TIE_TOLERANCE
            }
        };
    }
    (mu, nu)
}

fn check_formula(m: &Mdp, f: &Formula) -> Result<(), EngineError> {
    if f.fragment() != Fragment::Cpctl
        || f.paths().iter().any(|p| !matches!(p, PathNode::ContinuingWeakUntil(..)))
    {
        return Err(EngineError::NotCpctl(f.fragment()));
    }
    for atom in f.atoms() {
        if m.labeling().atom_index(&atom).is_none() {
            return Err(EngineError::UnknownAtom(atom));
        }
    }
    Ok(())
}

/// A partial or complete successor assignment with its raw counter sums.
#[derive(Clone)]
struct Partial {
    raw: Vec<f64>,
    assignment: Vec<(StateId, PointId)>,
}

fn prune_partials(parts: Vec<Partial>, cap: usize) -> Vec<Partial> {
    let keep = prune_indices(&|_| &[], &|i| parts[i].raw.as_slice(), parts.len(), 0.0, cap);
    let mut slots: Vec<Option<Partial>> = parts.into_iter().map(Some).collect();
    keep.into_iter().map(|i| slots[i].take().expect("kept once")).collect()
}

/// Pareto-pruned sums over all successor-point assignments of one action.
fn action_assignments(m: &Mdp, v: &ValueVector, s: StateId, a: ActionId, pf: usize, cap: usize) -> Vec<Partial> {
    let mut parts = vec![Partial {
        raw: vec![0.0; pf],
        assignment: Vec::new(),
    }];
    for &(t, p) in &m.actions(s)[a].transitions {
        let mut next = Vec::with_capacity(parts.len() * v.ids(t).len());
        for part in &parts {
            for &q in v.ids(t) {
                let nu = &v.point(q).nu;
                let mut raw = part.raw.clone();
                for j in 0..pf {
                    raw[j] += p * nu[j];
                }
                let mut assignment = part.assignment.clone();
                assignment.push((t, q));
                next.push(Partial { raw, assignment });
            }
        }
        parts = prune_partials(next, cap);
    }
    parts
}

/// Raw sums of a candidate, computed from its action distribution and
/// assignment.
fn candidate_raw(m: &Mdp, v: &ValueVector, s: StateId, c: &Candidate, pf: usize) -> Vec<f64> {
    let mut raw = vec![0.0; pf];
    for &(a, w) in &c.delta {
        for &(t, p) in &m.actions(s)[a].transitions {
            let i = c
                .assignment
                .binary_search_by_key(&t, |e| e.0)
                .expect("assignment covers the support");
            let nu = &v.point(c.assignment[i].1).nu;
            for j in 0..pf {
                raw[j] += w * p * nu[j];
            }
        }
    }
    raw
}

fn make_point(
    f: &Formula,
    m: &Mdp,
    s: StateId,
    raw: &[f64],
    delta: Vec<(ActionId, f64)>,
    assignment: Vec<(StateId, PointId)>,
) -> FrontierPoint {
    let (mu, nu) = evaluate_counters(f, &|a| m.has_label(s, a), raw);
    FrontierPoint {
        mu,
        nu,
        witness: Some(WitnessRecord::Recursive {
            delta,
            successors: assignment,
        }),
    }
}

/// New frontier at `s`: the ids of old points that survive and the new
/// points that join them.
fn state_update(
    m: &Mdp,
    f: &Formula,
    v: &ValueVector,
    cfg: &EngineConfig,
    s: StateId,
) -> (Vec<PointId>, Vec<FrontierPoint>) {
    let pf = f.pf();
    let old = v.ids(s);
    if pf == 0 {
        return (old.to_vec(), Vec::new());
    }
    let partial_cap = cfg.max_points.saturating_mul(4);
    let mut pure: Vec<(FrontierPoint, Candidate)> = Vec::new();
    for a in 0..m.actions(s).len() {
        for part in action_assignments(m, v, s, a, pf, partial_cap) {
            let mut assignment = part.assignment;
            assignment.sort_by_key(|e| e.0);
            let point = make_point(f, m, s, &part.raw, vec![(a, 1.0)], assignment.clone());
            pure.push((
                point,
                Candidate {
                    delta: vec![(a, 1.0)],
                    assignment,
                },
            ));
        }
    }
    let keep = prune_indices(
        &|i| pure[i].0.mu.as_slice(),
        &|i| pure[i].0.nu.as_slice(),
        pure.len(),
        cfg.epsilon,
        cfg.max_points,
    );
    let pool: Vec<&(FrontierPoint, Candidate)> = keep.iter().map(|&i| &pure[i]).collect();
    let mut fresh: Vec<FrontierPoint> = pool.iter().map(|(p, _)| p.clone()).collect();
    for i in 0..pool.len() {
        for j in i + 1..pool.len() {
            let (c1, c2) = (&pool[i].1, &pool[j].1);
            if c1.delta == c2.delta {
                continue;
            }
            for k in 1..cfg.w_mix {
                let mixed = mix_pair(c1, c2, k as f64 / cfg.w_mix as f64);
                let raw = candidate_raw(m, v, s, &mixed, pf);
                fresh.push(make_point(f, m, s, &raw, mixed.delta, mixed.assignment));
            }
        }
    }
    // Old points first, so equal values keep their older witness.
    let n_old = old.len();
    let keep = prune_indices(
        &|i| {
            if i < n_old {
                v.point(old[i]).mu.as_slice()
            } else {
                fresh[i - n_old].mu.as_slice()
            }
        },
        &|i| {
            if i < n_old {
                v.point(old[i]).nu.as_slice()
            } else {
                fresh[i - n_old].nu.as_slice()
            }
        },
        n_old + fresh.len(),
        cfg.epsilon,
        cfg.max_points,
    );
    let mut kept_old = Vec::new();
    let mut slots: Vec<Option<FrontierPoint>> = fresh.into_iter().map(Some).collect();
    let mut new_points = Vec::new();
    for i in keep {
        if i < n_old {
            kept_old.push(old[i]);
        } else {
            new_points.push(slots[i - n_old].take().expect("kept once"));
        }
    }
    (kept_old, new_points)
}

/// One application of the extended Bellman operator, with accumulate-union:
/// old points compete with the new candidates and survive unless covered.
pub fn bellman_step(
    m: &Mdp,
    f: &Formula,
    v: &ValueVector,
    cfg: &EngineConfig,
) -> Result<ValueVector, EngineError> {
    check_formula(m, f)?;
    if v.num_states() != m.num_states() {
        return Err(EngineError::Dimension(format!(
            "{} states in the value vector, {} in the model",
            v.num_states(),
            m.num_states()
        )));
    }
    for s in 0..m.num_states() {
        if let Some(p) = v.points(s).find(|p| p.nu.len() != f.pf() || p.mu.len() != f.sf()) {
            return Err(EngineError::Dimension(format!(
                "point at state '{}' has {} counters, formula has {}",
                m.state_name(s),
                p.nu.len(),
                f.pf()
            )));
        }
    }
    let updates: Vec<(Vec<PointId>, Vec<FrontierPoint>)> = (0..m.num_states())
        .into_par_iter()
        .map(|s| state_update(m, f, v, cfg, s))
        .collect();
    let mut out = v.clone();
    let mut chunk = Vec::new();
    let mut spans = Vec::with_capacity(updates.len());
    for (s, (_, new_points)) in updates.iter().enumerate() {
        let start = chunk.len();
        chunk.extend(new_points.iter().cloned().map(|p| (s, p)));
        spans.push(start..chunk.len());
    }
    let ids = out.push_chunk(chunk);
    for (s, (old, _)) in updates.into_iter().enumerate() {
        let mut list = old;
        list.extend_from_slice(&ids[spans[s].clone()]);
        // Keep lists in canonical order regardless of origin.
        list.sort_by(|&a, &b| {
            let (pa, pb) = (out.point(a), out.point(b));
            crate::frontier::canonical_cmp(&pa.mu, &pa.nu, &pb.mu, &pb.nu)
        });
        out.set_state(s, list);
    }
    Ok(out)
}

/// First point at `s` whose valuation satisfies the whole formula.
pub fn target_point(f: &Formula, v: &ValueVector, s: StateId) -> Option<PointId> {
    v.ids(s).iter().copied().find(|&id| v.point(id).mu[f.root()])
}

pub fn run_vi(m: &Mdp, f: &Formula, cfg: &EngineConfig) -> Result<VIResult, EngineError> {
    run_vi_until(m, f, cfg, true)
}

/// Value iteration from the initial vector. With `stop_at_target` false the
/// loop ignores the target and runs to convergence or the cap.
pub fn run_vi_until(
    m: &Mdp,
    f: &Formula,
    cfg: &EngineConfig,
    stop_at_target: bool,
) -> Result<VIResult, EngineError> {
    cfg.validate()?;
    check_formula(m, f)?;
    let s0 = m.initial();
    let mut v = initial_value_vector(m, f);
    let mut iterations = 0;
    let mut monotone = true;
    let mut last_change = f64::INFINITY;
    let status = loop {
        if stop_at_target && target_point(f, &v, s0).is_some() {
            break VIStatus::TargetMet;
        }
        if iterations >= cfg.max_iters {
            break VIStatus::IterCap;
        }
        let next = bellman_step(m, f, &v, cfg)?;
        iterations += 1;
        monotone &= v.covered_by(&next, cfg.epsilon + TIE_TOLERANCE);
        last_change = next.max_change(&v);
        v = next;
        if last_change < cfg.convergence_delta {
            break if stop_at_target && target_point(f, &v, s0).is_some() {
                VIStatus::TargetMet
            } else {
                VIStatus::ConvergedTargetUnmet
            };
        }
    };
    let target = target_point(f, &v, s0);
    Ok(VIResult {
        status,
        frontiers: v,
        iterations,
        target_point: target,
        last_change,
        monotone,
    })
}

/// The initial-state frontier projected onto two counters, reduced to its
/// maximal pairs and sorted by `x` ascending (so `y` is nonincreasing).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierCurve {
    pub x_path: PathId,
    pub y_path: PathId,
    pub points: Vec<(f64, f64)>,
}

impl FrontierCurve {
    pub fn from_pairs(x_path: PathId, y_path: PathId, pairs: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut pts: Vec<(f64, f64)> = pairs.into_iter().collect();
        // Descending x, then descending y; keep strict improvements in y.
        pts.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
        let mut out: Vec<(f64, f64)> = Vec::new();
        for p in pts {
            if out.last().is_none_or(|q| p.1 > q.1) {
                out.push(p);
            }
        }
        out.reverse();
        FrontierCurve {
            x_path,
            y_path,
            points: out,
        }
    }

    /// Corner points of the staircase bounding the achievable region, from
    /// `x = 0` to the largest `x`.
    pub fn step_pairs(&self) -> Vec<(f64, f64)> {
        step_pairs(&self.points)
    }
}

/// Staircase corners of maximal pairs sorted by ascending `x`.
pub fn step_pairs(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut x_prev = 0.0;
    for &(x, y) in points {
        out.push((x_prev, y));
        out.push((x, y));
        x_prev = x;
    }
    out
}

#[derive(Debug, Clone)]
pub struct MaxAchievable {
    pub curve: FrontierCurve,
    pub result: VIResult,
}

/// Runs to convergence ignoring the target and returns the initial-state
/// trade-off between `objective` and the lowest-indexed other counter.
pub fn max_achievable(
    m: &Mdp,
    f: &Formula,
    objective: PathId,
    cfg: &EngineConfig,
) -> Result<MaxAchievable, EngineError> {
    if !f.top_level_paths().contains(&objective) {
        return Err(EngineError::Objective(objective));
    }
    let result = run_vi_until(m, f, cfg, false)?;
    let x_path = (0..f.pf()).find(|&j| j != objective).unwrap_or(objective);
    let v = &result.frontiers;
    let curve = FrontierCurve::from_pairs(
        x_path,
        objective,
        v.points(m.initial()).map(|p| (p.nu[x_path], p.nu[objective])),
    );
    Ok(MaxAchievable { curve, result })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlaterReport {
    pub margin: f64,
    /// The bumped formula, absent when some threshold cannot be raised.
    pub bumped_formula: Option<String>,
    pub status: Option<VIStatus>,
    pub note: String,
}

/// Reruns synthesis with every positive threshold raised by the margin and
/// reports whether the raised target is still met.
pub fn slater_check(m: &Mdp, f: &Formula, cfg: &EngineConfig) -> Result<SlaterReport, EngineError> {
    let margin = cfg.slater_margin;
    let t = f.thresholds();
    if let Some(j) = t.values.iter().position(|&p| p > 0.0 && p + margin > 1.0) {
        return Ok(SlaterReport {
            margin,
            bumped_formula: None,
            status: None,
            note: format!(
                "threshold {} of path {j} cannot be raised by {margin}",
                t.values[j]
            ),
        });
    }
    let bumped = Thresholds::new(
        t.values
            .iter()
            .map(|&p| if p > 0.0 { p + margin } else { p })
            .collect(),
    )?;
    let g = slater_transform(f, &bumped)?;
    let r = run_vi(m, &g, cfg)?;
    let note = match r.status {
        VIStatus::TargetMet => "raised target is met; the margin assumption plausibly holds".into(),
        _ => "raised target was not met at this approximation".into(),
    };
    Ok(SlaterReport {
        margin,
        bumped_formula: Some(g.to_string()),
        status: Some(r.status),
        note,
    })
}
