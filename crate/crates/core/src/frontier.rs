//! Per-state Pareto sets of (valuation, counter) points.

use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::model::{ActionId, StateId};
use crate::reachability::SafeSet;

/// Location of a point in a [`ValueVector`] arena: `(chunk, index)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PointId {
    pub chunk: u32,
    pub index: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WitnessRecord {
    /// Every counter is settled by the current state alone.
    TerminalOne,
    /// All counters are zero.
    Zero,
    Recursive {
        delta: Vec<(ActionId, f64)>,
        /// One entry per successor in the support of `delta`, sorted by state.
        successors: Vec<(StateId, PointId)>,
    },
    /// Counters in {0, 1}, realized by staying inside a safe set forever.
    SafeSet { safe: Arc<SafeSet> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPoint {
    pub mu: Vec<bool>,
    pub nu: Vec<f64>,
    pub witness: Option<WitnessRecord>,
}

impl FrontierPoint {
    pub fn new(mu: Vec<bool>, nu: Vec<f64>) -> Self {
        FrontierPoint {
            mu,
            nu,
            witness: None,
        }
    }
}

/// `q <= p` componentwise, on both valuations and counters.
pub fn dominates(p: &FrontierPoint, q: &FrontierPoint) -> bool {
    dominates_raw(&p.mu, &p.nu, &q.mu, &q.nu, 0.0)
}

fn dominates_raw(pmu: &[bool], pnu: &[f64], qmu: &[bool], qnu: &[f64], eps: f64) -> bool {
    debug_assert_eq!(pmu.len(), qmu.len());
    debug_assert_eq!(pnu.len(), qnu.len());
    pmu.iter().zip(qmu).all(|(&a, &b)| a || !b) && pnu.iter().zip(qnu).all(|(&a, &b)| a >= b - eps)
}

/// Canonical order: counters descending lexicographically, then valuations
/// descending. A point can only be dominated by points before it.
pub fn canonical_cmp(amu: &[bool], anu: &[f64], bmu: &[bool], bnu: &[f64]) -> Ordering {
    for (x, y) in anu.iter().zip(bnu) {
        match y.total_cmp(x) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    for (x, y) in amu.iter().zip(bmu) {
        match y.cmp(x) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    Ordering::Equal
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Indices of the points kept by [`prune_maximal`], in canonical order.
pub fn prune_indices<'a>(
    mu: &dyn Fn(usize) -> &'a [bool],
    nu: &dyn Fn(usize) -> &'a [f64],
    n: usize,
    eps: f64,
    cap: usize,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| canonical_cmp(mu(a), nu(a), mu(b), nu(b)));
    // One sweep does both the dominance filter and the epsilon thinning: a
    // point covered by a dropped point is covered by the kept point that
    // dropped it.
    let mut kept: Vec<usize> = Vec::new();
    for &i in &order {
        let covered = kept
            .iter()
            .any(|&k| dominates_raw(mu(k), nu(k), mu(i), nu(i), eps));
        if !covered {
            kept.push(i);
        }
    }
    if kept.len() <= cap {
        return kept;
    }
    let dim = nu(kept[0]).len();
    let mut chosen: Vec<usize> = Vec::new();
    let mut taken = vec![false; kept.len()];
    for j in 0..dim {
        if chosen.len() >= cap {
            break;
        }
        let mut best = 0;
        for k in 1..kept.len() {
            if nu(kept[k])[j] > nu(kept[best])[j] {
                best = k;
            }
        }
        if !taken[best] {
            taken[best] = true;
            chosen.push(best);
        }
    }
    if chosen.is_empty() {
        taken[0] = true;
        chosen.push(0);
    }
    let mut dist: Vec<f64> = (0..kept.len())
        .map(|k| {
            chosen
                .iter()
                .map(|&c| linf(nu(kept[k]), nu(kept[c])))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    while chosen.len() < cap {
        let mut best: Option<usize> = None;
        for k in 0..kept.len() {
            if !taken[k] && best.is_none_or(|b| dist[k] > dist[b]) {
                best = Some(k);
            }
        }
        let Some(b) = best else { break };
        taken[b] = true;
        chosen.push(b);
        for k in 0..kept.len() {
            dist[k] = dist[k].min(linf(nu(kept[k]), nu(kept[b])));
        }
    }
    chosen.sort_unstable();
    chosen.into_iter().map(|k| kept[k]).collect()
}

/// Maximal elements, thinned at resolution `eps` and capped at `cap` points.
pub fn prune_maximal(points: Vec<FrontierPoint>, eps: f64, cap: usize) -> Vec<FrontierPoint> {
    let keep = prune_indices(
        &|i| points[i].mu.as_slice(),
        &|i| points[i].nu.as_slice(),
        points.len(),
        eps,
        cap,
    );
    let mut slots: Vec<Option<FrontierPoint>> = points.into_iter().map(Some).collect();
    keep.into_iter()
        .map(|i| slots[i].take().expect("index kept once"))
        .collect()
}

/// An action distribution with a successor-point assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub delta: Vec<(ActionId, f64)>,
    pub assignment: Vec<(StateId, PointId)>,
}

/// `w * c1 + (1 - w) * c2`. Successors reached by both sides take the
/// assignment of the heavier side (the first on a tie).
pub fn mix_pair(c1: &Candidate, c2: &Candidate, w: f64) -> Candidate {
    if w >= 1.0 {
        return c1.clone();
    }
    if w <= 0.0 {
        return c2.clone();
    }
    let mut delta: Vec<(ActionId, f64)> = Vec::new();
    for &(a, p) in &c1.delta {
        delta.push((a, w * p));
    }
    for &(a, p) in &c2.delta {
        delta.push((a, (1.0 - w) * p));
    }
    delta.sort_by_key(|e| e.0);
    delta.dedup_by(|b, a| {
        if a.0 == b.0 {
            a.1 += b.1;
            true
        } else {
            false
        }
    });
    let (major, minor) = if w >= 0.5 { (c1, c2) } else { (c2, c1) };
    let mut assignment = major.assignment.clone();
    for &(t, pid) in &minor.assignment {
        if !major.assignment.iter().any(|e| e.0 == t) {
            assignment.push((t, pid));
        }
    }
    assignment.sort_by_key(|e| e.0);
    Candidate { delta, assignment }
}

/// All pairwise mixtures on the grid `k / w_mix`, `0 < k < w_mix`.
pub fn mix_candidates(cands: &[Candidate], w_mix: u32) -> Vec<Candidate> {
    let mut out = Vec::new();
    for i in 0..cands.len() {
        for j in i + 1..cands.len() {
            for k in 1..w_mix {
                out.push(mix_pair(&cands[i], &cands[j], k as f64 / w_mix as f64));
            }
        }
    }
    out
}

/// Per-state point lists over a chunked, append-only arena. Chunks are
/// shared between successive iterates, so cloning is cheap.
#[derive(Debug, Clone)]
pub struct ValueVector {
    chunks: Vec<Arc<Vec<(StateId, FrontierPoint)>>>,
    per_state: Vec<Vec<PointId>>,
}

impl ValueVector {
    pub fn new(num_states: usize) -> Self {
        ValueVector {
            chunks: Vec::new(),
            per_state: vec![Vec::new(); num_states],
        }
    }

    /// Appends a chunk of new points; returns their ids in order.
    pub fn push_chunk(&mut self, points: Vec<(StateId, FrontierPoint)>) -> Vec<PointId> {
        let chunk = self.chunks.len() as u32;
        let ids = (0..points.len())
            .map(|i| PointId {
                chunk,
                index: i as u32,
            })
            .collect();
        self.chunks.push(Arc::new(points));
        ids
    }

    pub fn set_state(&mut self, s: StateId, ids: Vec<PointId>) {
        self.per_state[s] = ids;
    }

    pub fn num_states(&self) -> usize {
        self.per_state.len()
    }

    pub fn point(&self, id: PointId) -> &FrontierPoint {
        &self.chunks[id.chunk as usize][id.index as usize].1
    }

    /// The state a point was created for.
    pub fn point_state(&self, id: PointId) -> StateId {
        self.chunks[id.chunk as usize][id.index as usize].0
    }

    pub fn ids(&self, s: StateId) -> &[PointId] {
        &self.per_state[s]
    }

    pub fn points(&self, s: StateId) -> impl Iterator<Item = &FrontierPoint> + '_ {
        self.per_state[s].iter().map(move |&id| self.point(id))
    }

    pub fn total_points(&self) -> usize {
        self.per_state.iter().map(Vec::len).sum()
    }

    /// Largest per-state Hausdorff distance (L-infinity on counters).
    pub fn max_change(&self, other: &ValueVector) -> f64 {
        (0..self.num_states())
            .map(|s| {
                let a: Vec<&[f64]> = self.points(s).map(|p| p.nu.as_slice()).collect();
                let b: Vec<&[f64]> = other.points(s).map(|p| p.nu.as_slice()).collect();
                hausdorff(&a, &b)
            })
            .fold(0.0, f64::max)
    }

    /// Every point of `self` is dominated, up to `eps` on counters, by a point
    /// of `later` at the same state.
    pub fn covered_by(&self, later: &ValueVector, eps: f64) -> bool {
        (0..self.num_states()).all(|s| {
            self.points(s).all(|p| {
                later
                    .points(s)
                    .any(|q| dominates_raw(&q.mu, &q.nu, &p.mu, &p.nu, eps))
            })
        })
    }
}

fn hausdorff(a: &[&[f64]], b: &[&[f64]]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let one = |x: &[&[f64]], y: &[&[f64]]| {
        x.iter()
            .map(|p| y.iter().map(|q| linf(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(mu: &[bool], nu: &[f64]) -> FrontierPoint {
        FrontierPoint::new(mu.to_vec(), nu.to_vec())
    }

    #[test]
    fn dominance_examples() {
        let a = pt(&[true], &[0.5]);
        assert!(dominates(&a, &a));
        let p = pt(&[false], &[0.9]);
        let q = pt(&[true], &[0.1]);
        assert!(!dominates(&p, &q) && !dominates(&q, &p));
        let top = pt(&[true, true], &[1.0]);
        assert!(dominates(&top, &pt(&[false, true], &[0.3])));
    }

    #[test]
    fn pruning_examples() {
        let out = prune_maximal(vec![pt(&[true], &[0.5]), pt(&[true], &[0.6])], 0.0, 64);
        assert_eq!(out, vec![pt(&[true], &[0.6])]);
        let out = prune_maximal(
            vec![pt(&[true], &[0.7, 0.2]), pt(&[true], &[0.2, 0.7])],
            1e-3,
            64,
        );
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn thinning_bounds_a_segment() {
        let pts: Vec<_> = (0..1000)
            .map(|i| {
                let x = i as f64 / 999.0;
                pt(&[], &[x, 1.0 - x])
            })
            .collect();
        let out = prune_maximal(pts, 1e-3, usize::MAX);
        assert!(out.len() <= 1001, "{}", out.len());
        assert!(out.len() > 400);
    }

    #[test]
    fn cap_keeps_coordinate_extremes() {
        let pts: Vec<_> = (0..50)
            .map(|i| {
                let x = i as f64 / 49.0;
                pt(&[], &[x, 1.0 - x * x])
            })
            .collect();
        let out = prune_maximal(pts, 0.0, 5);
        assert_eq!(out.len(), 5);
        assert!(out.iter().any(|p| p.nu[0] == 1.0));
        assert!(out.iter().any(|p| p.nu[1] == 1.0));
    }

    #[test]
    fn mixing_grid() {
        let id = |i| PointId { chunk: 0, index: i };
        let c1 = Candidate {
            delta: vec![(0, 1.0)],
            assignment: vec![(1, id(0)), (2, id(1))],
        };
        let c2 = Candidate {
            delta: vec![(1, 1.0)],
            assignment: vec![(2, id(2)), (3, id(3))],
        };
        assert_eq!(mix_pair(&c1, &c2, 1.0), c1);
        assert_eq!(mix_pair(&c1, &c2, 0.0), c2);
        let m = mix_pair(&c1, &c2, 0.25);
        assert_eq!(m.delta, vec![(0, 0.25), (1, 0.75)]);
        assert_eq!(m.assignment, vec![(1, id(0)), (2, id(2)), (3, id(3))]);
        assert_eq!(mix_candidates(&[c1, c2], 4).len(), 3);
    }
}
