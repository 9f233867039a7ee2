//! Safe-PCTL / CPCTL state formulas.
//!
//! A [`Formula`] is an arena of state nodes and path nodes. Node ids are
//! positions in the subformula table: state nodes are sorted by total depth
//! (children always precede parents, the root is last) and path ids follow
//! the order of their owning `P>=` node. Valuation vectors `mu` are indexed
//! by state node id and counter vectors `nu` by path id.

mod ops;
mod parse;
mod print;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ops::{
    alit, alit_holds, canonical_valuation, depths, eval_boolean, fd_transform,
    literal_projection, slater_transform,
};
pub use parse::{parse_formula, parse_formula_with, ParseOptions};

/// Slack used when comparing a computed probability against a threshold.
pub const TIE_TOLERANCE: f64 = 1e-12;

pub type NodeId = usize;
pub type PathId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fragment {
    Cpctl,
    SafePctl,
    /// Output of [`fd_transform`]: admits `U` and disjunction. Never parsed.
    Full,
}

impl fmt::Display for Fragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fragment::Cpctl => "CPCTL",
            Fragment::SafePctl => "safe-PCTL",
            Fragment::Full => "PCTL",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulaError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{operator} is not allowed in {fragment} formulas")]
    FragmentViolation {
        operator: &'static str,
        fragment: Fragment,
    },
    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("expected {expected} thresholds, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("formula contains probabilistic operators; expected a boolean formula")]
    NotBoolean,
}

/// Tree form of a state formula, used for construction and comparison.
#[derive(Debug, Clone, PartialEq)]
pub enum StateExpr {
    True,
    False,
    Atom(String),
    NegAtom(String),
    And(Box<StateExpr>, Box<StateExpr>),
    Or(Box<StateExpr>, Box<StateExpr>),
    Prob(f64, Box<PathExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathExpr {
    Next(StateExpr),
    WeakUntil(StateExpr, StateExpr),
    /// `l W (l & r)`.
    ContinuingWeakUntil(StateExpr, StateExpr),
    Until(StateExpr, StateExpr),
}

impl StateExpr {
    pub fn atom(name: &str) -> Self {
        StateExpr::Atom(name.to_string())
    }

    pub fn neg(name: &str) -> Self {
        StateExpr::NegAtom(name.to_string())
    }

    pub fn and(l: StateExpr, r: StateExpr) -> Self {
        StateExpr::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: StateExpr, r: StateExpr) -> Self {
        StateExpr::Or(Box::new(l), Box::new(r))
    }

    pub fn prob(p: f64, path: PathExpr) -> Self {
        StateExpr::Prob(p, Box::new(path))
    }

    /// `P>=p [G body]`.
    pub fn always(p: f64, body: StateExpr) -> Self {
        StateExpr::prob(p, PathExpr::ContinuingWeakUntil(body, StateExpr::False))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateNode {
    True,
    False,
    Atom(String),
    NegAtom(String),
    And(NodeId, NodeId),
    Or(NodeId, NodeId),
    ProbGeq { threshold: f64, path: PathId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathNode {
    Next(NodeId),
    WeakUntil(NodeId, NodeId),
    ContinuingWeakUntil(NodeId, NodeId),
    Until(NodeId, NodeId),
}

impl PathNode {
    /// Left operand (the "held" formula; the operand of `X`).
    pub fn left(&self) -> NodeId {
        match *self {
            PathNode::Next(a)
            | PathNode::WeakUntil(a, _)
            | PathNode::ContinuingWeakUntil(a, _)
            | PathNode::Until(a, _) => a,
        }
    }

    pub fn right(&self) -> Option<NodeId> {
        match *self {
            PathNode::Next(_) => None,
            PathNode::WeakUntil(_, b)
            | PathNode::ContinuingWeakUntil(_, b)
            | PathNode::Until(_, b) => Some(b),
        }
    }
}

/// Per-path probability thresholds, indexed like the path table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub values: Vec<f64>,
}

impl Thresholds {
    pub fn new(values: Vec<f64>) -> Result<Self, FormulaError> {
        for &v in &values {
            if !(0.0..=1.0).contains(&v) {
                return Err(FormulaError::InvalidThreshold(v));
            }
        }
        Ok(Thresholds { values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    nodes: Vec<StateNode>,
    paths: Vec<PathNode>,
    owners: Vec<NodeId>,
    depth_n: Vec<usize>,
    depth_t: Vec<usize>,
    fragment: Fragment,
}

impl Formula {
    pub fn from_expr(expr: &StateExpr, fragment: Fragment) -> Result<Self, FormulaError> {
        validate(expr, fragment)?;
        Ok(lower(expr, fragment))
    }

    pub fn fragment(&self) -> Fragment {
        self.fragment
    }

    pub fn root(&self) -> NodeId {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[StateNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &StateNode {
        &self.nodes[id]
    }

    pub fn paths(&self) -> &[PathNode] {
        &self.paths
    }

    pub fn path(&self, j: PathId) -> PathNode {
        self.paths[j]
    }

    /// Number of state subformulas.
    pub fn sf(&self) -> usize {
        self.nodes.len()
    }

    /// Number of path subformulas.
    pub fn pf(&self) -> usize {
        self.paths.len()
    }

    /// The `P>=` node that owns path `j`.
    pub fn owner(&self, j: PathId) -> NodeId {
        self.owners[j]
    }

    pub fn threshold(&self, j: PathId) -> f64 {
        match self.nodes[self.owners[j]] {
            StateNode::ProbGeq { threshold, .. } => threshold,
            _ => unreachable!("path owner is always a P>= node"),
        }
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            values: (0..self.pf()).map(|j| self.threshold(j)).collect(),
        }
    }

    pub fn depth_n(&self, id: NodeId) -> usize {
        self.depth_n[id]
    }

    pub fn depth_t(&self, id: NodeId) -> usize {
        self.depth_t[id]
    }

    /// Paths whose owner is not nested under another `P>=` node.
    pub fn top_level_paths(&self) -> Vec<PathId> {
        let mut nested = vec![false; self.pf()];
        for j in 0..self.pf() {
            let p = self.paths[j];
            let mut stack = vec![p.left()];
            stack.extend(p.right());
            while let Some(n) = stack.pop() {
                match self.nodes[n] {
                    StateNode::And(a, b) | StateNode::Or(a, b) => {
                        stack.push(a);
                        stack.push(b);
                    }
                    StateNode::ProbGeq { path, .. } => nested[path] = true,
                    _ => {}
                }
            }
        }
        (0..self.pf()).filter(|&j| !nested[j]).collect()
    }

    pub fn atoms(&self) -> BTreeSet<String> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                StateNode::Atom(a) | StateNode::NegAtom(a) => Some(a.clone()),
                _ => None,
            })
            .collect()
    }

    pub fn is_boolean(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn to_expr(&self) -> StateExpr {
        self.subexpr(self.root())
    }

    pub fn subexpr(&self, id: NodeId) -> StateExpr {
        match &self.nodes[id] {
            StateNode::True => StateExpr::True,
            StateNode::False => StateExpr::False,
            StateNode::Atom(a) => StateExpr::Atom(a.clone()),
            StateNode::NegAtom(a) => StateExpr::NegAtom(a.clone()),
            StateNode::And(l, r) => StateExpr::and(self.subexpr(*l), self.subexpr(*r)),
            StateNode::Or(l, r) => StateExpr::or(self.subexpr(*l), self.subexpr(*r)),
            StateNode::ProbGeq { threshold, path } => {
                let p = match self.paths[*path] {
                    PathNode::Next(a) => PathExpr::Next(self.subexpr(a)),
                    PathNode::WeakUntil(a, b) => {
                        PathExpr::WeakUntil(self.subexpr(a), self.subexpr(b))
                    }
                    PathNode::ContinuingWeakUntil(a, b) => {
                        PathExpr::ContinuingWeakUntil(self.subexpr(a), self.subexpr(b))
                    }
                    PathNode::Until(a, b) => PathExpr::Until(self.subexpr(a), self.subexpr(b)),
                };
                StateExpr::prob(*threshold, p)
            }
        }
    }

    /// The subformula rooted at `id` as a standalone formula.
    pub fn subformula(&self, id: NodeId) -> Formula {
        lower(&self.subexpr(id), self.fragment)
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_expr(), f)
    }
}

fn validate(expr: &StateExpr, fragment: Fragment) -> Result<(), FormulaError> {
    let violation = |operator| FormulaError::FragmentViolation { operator, fragment };
    match expr {
        StateExpr::True | StateExpr::False | StateExpr::Atom(_) | StateExpr::NegAtom(_) => Ok(()),
        StateExpr::And(l, r) => {
            validate(l, fragment)?;
            validate(r, fragment)
        }
        StateExpr::Or(l, r) => {
            if fragment != Fragment::Full {
                return Err(violation("disjunction"));
            }
            validate(l, fragment)?;
            validate(r, fragment)
        }
        StateExpr::Prob(p, path) => {
            if !(0.0..=1.0).contains(p) {
                return Err(FormulaError::InvalidThreshold(*p));
            }
            match path.as_ref() {
                PathExpr::Next(a) => {
                    if fragment == Fragment::Cpctl {
                        return Err(violation("X"));
                    }
                    validate(a, fragment)
                }
                PathExpr::WeakUntil(a, b) => {
                    if fragment == Fragment::Cpctl {
                        return Err(violation("non-continuing W"));
                    }
                    validate(a, fragment)?;
                    validate(b, fragment)
                }
                PathExpr::ContinuingWeakUntil(a, b) => {
                    validate(a, fragment)?;
                    validate(b, fragment)
                }
                PathExpr::Until(a, b) => {
                    if fragment != Fragment::Full {
                        return Err(violation("U"));
                    }
                    validate(a, fragment)?;
                    validate(b, fragment)
                }
            }
        }
    }
}

enum RawPath {
    Next(usize),
    Weak(usize, usize),
    Cont(usize, usize),
    Until(usize, usize),
}

enum RawNode {
    Leaf(StateNode),
    And(usize, usize),
    Or(usize, usize),
    Prob(f64, RawPath),
}

fn push_raw(expr: &StateExpr, out: &mut Vec<RawNode>) -> usize {
    let node = match expr {
        StateExpr::True => RawNode::Leaf(StateNode::True),
        StateExpr::False => RawNode::Leaf(StateNode::False),
        StateExpr::Atom(a) => RawNode::Leaf(StateNode::Atom(a.clone())),
        StateExpr::NegAtom(a) => RawNode::Leaf(StateNode::NegAtom(a.clone())),
        StateExpr::And(l, r) => {
            let l = push_raw(l, out);
            let r = push_raw(r, out);
            RawNode::And(l, r)
        }
        StateExpr::Or(l, r) => {
            let l = push_raw(l, out);
            let r = push_raw(r, out);
            RawNode::Or(l, r)
        }
        StateExpr::Prob(p, path) => {
            let raw = match path.as_ref() {
                PathExpr::Next(a) => RawPath::Next(push_raw(a, out)),
                PathExpr::WeakUntil(a, b) => {
                    let a = push_raw(a, out);
                    RawPath::Weak(a, push_raw(b, out))
                }
                PathExpr::ContinuingWeakUntil(a, b) => {
                    let a = push_raw(a, out);
                    RawPath::Cont(a, push_raw(b, out))
                }
                PathExpr::Until(a, b) => {
                    let a = push_raw(a, out);
                    RawPath::Until(a, push_raw(b, out))
                }
            };
            RawNode::Prob(*p, raw)
        }
    };
    out.push(node);
    out.len() - 1
}

fn lower(expr: &StateExpr, fragment: Fragment) -> Formula {
    let mut raw = Vec::new();
    push_raw(expr, &mut raw);

    // Depths in post-order, where children are already computed.
    let n = raw.len();
    let mut dn = vec![0usize; n];
    let mut dt = vec![0usize; n];
    for i in 0..n {
        let (a, b) = match &raw[i] {
            RawNode::Leaf(_) => continue,
            RawNode::And(l, r) | RawNode::Or(l, r) => {
                dn[i] = dn[*l].max(dn[*r]);
                dt[i] = if dt[*l] + dt[*r] == 0 { 0 } else { 1 + dt[*l].max(dt[*r]) };
                continue;
            }
            RawNode::Prob(_, RawPath::Next(a)) => (*a, *a),
            RawNode::Prob(_, RawPath::Weak(a, b))
            | RawNode::Prob(_, RawPath::Cont(a, b))
            | RawNode::Prob(_, RawPath::Until(a, b)) => (*a, *b),
        };
        dn[i] = 1 + dn[a].max(dn[b]);
        dt[i] = 1 + dt[a].max(dt[b]);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| dt[i]);
    let mut pos = vec![0usize; n];
    for (k, &i) in order.iter().enumerate() {
        pos[i] = k;
    }

    let mut nodes = Vec::with_capacity(n);
    let mut paths = Vec::new();
    let mut owners = Vec::new();
    for &i in &order {
        let node = match &raw[i] {
            RawNode::Leaf(l) => l.clone(),
            RawNode::And(l, r) => StateNode::And(pos[*l], pos[*r]),
            RawNode::Or(l, r) => StateNode::Or(pos[*l], pos[*r]),
            RawNode::Prob(p, rp) => {
                let path = match rp {
                    RawPath::Next(a) => PathNode::Next(pos[*a]),
                    RawPath::Weak(a, b) => PathNode::WeakUntil(pos[*a], pos[*b]),
                    RawPath::Cont(a, b) => PathNode::ContinuingWeakUntil(pos[*a], pos[*b]),
                    RawPath::Until(a, b) => PathNode::Until(pos[*a], pos[*b]),
                };
                paths.push(path);
                owners.push(nodes.len());
                StateNode::ProbGeq {
                    threshold: *p,
                    path: paths.len() - 1,
                }
            }
        };
        nodes.push(node);
    }
    Formula {
        nodes,
        paths,
        owners,
        depth_n: order.iter().map(|&i| dn[i]).collect(),
        depth_t: order.iter().map(|&i| dt[i]).collect(),
        fragment,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn children_precede_parents() {
        let f = parse_formula("P>=0.5 [ G P>=0.6 [ !d W (!d & G) ] ]", Fragment::Cpctl).unwrap();
        for (id, node) in f.nodes().iter().enumerate() {
            match node {
                StateNode::And(a, b) | StateNode::Or(a, b) => assert!(*a < id && *b < id),
                StateNode::ProbGeq { path, .. } => {
                    let p = f.path(*path);
                    assert!(p.left() < id);
                    assert!(p.right().is_none_or(|r| r < id));
                }
                _ => {}
            }
        }
        assert_eq!(f.root(), f.sf() - 1);
        assert_eq!(f.pf(), 2);
        // The inner counter comes first.
        assert!(f.owner(0) < f.owner(1));
        assert_eq!(f.threshold(0), 0.6);
        assert_eq!(f.top_level_paths(), vec![1]);
    }

    #[test]
    fn depths_match_hand_counts() {
        let f = parse_formula("a & !b", Fragment::Cpctl).unwrap();
        assert_eq!((f.depth_n(f.root()), f.depth_t(f.root())), (0, 0));
        let f = parse_formula("P>=0.3 [a W (a & b)]", Fragment::Cpctl).unwrap();
        assert_eq!(f.depth_n(f.root()), 1);
        let f = parse_formula("P>=0.5 [ G P>=0.6 [ !d W (!d & G) ] ]", Fragment::Cpctl).unwrap();
        assert_eq!(f.depth_n(f.root()), 2);
        assert_eq!(f.depth_t(f.root()), 2);
        let f = parse_formula("a & P>=0.3 [G b]", Fragment::Cpctl).unwrap();
        assert_eq!(f.depth_n(f.root()), 1);
        assert_eq!(f.depth_t(f.root()), 2);
    }

    #[test]
    fn fragment_checks() {
        let x = StateExpr::prob(0.5, PathExpr::Next(StateExpr::atom("a")));
        assert!(matches!(
            Formula::from_expr(&x, Fragment::Cpctl),
            Err(FormulaError::FragmentViolation { operator: "X", .. })
        ));
        assert!(Formula::from_expr(&x, Fragment::SafePctl).is_ok());
        let bad = StateExpr::prob(1.5, PathExpr::Next(StateExpr::True));
        assert_eq!(
            Formula::from_expr(&bad, Fragment::SafePctl),
            Err(FormulaError::InvalidThreshold(1.5))
        );
    }
}
