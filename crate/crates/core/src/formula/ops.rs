use super::{
    Formula, FormulaError, NodeId, PathExpr, PathNode, StateExpr, StateNode, Thresholds,
    TIE_TOLERANCE,
};

fn alit_expr(f: &Formula, id: NodeId) -> StateExpr {
    match f.node(id) {
        StateNode::True => StateExpr::True,
        StateNode::False => StateExpr::False,
        StateNode::Atom(a) => StateExpr::Atom(a.clone()),
        StateNode::NegAtom(a) => StateExpr::NegAtom(a.clone()),
        StateNode::And(l, r) => StateExpr::and(alit_expr(f, *l), alit_expr(f, *r)),
        StateNode::Or(l, r) => StateExpr::or(alit_expr(f, *l), alit_expr(f, *r)),
        StateNode::ProbGeq { threshold, path } => {
            if *threshold == 0.0 {
                return StateExpr::True;
            }
            match f.path(*path) {
                PathNode::ContinuingWeakUntil(a, _) => alit_expr(f, a),
                // Outside CPCTL: position 0 of a satisfying path meets one operand.
                PathNode::WeakUntil(a, b) | PathNode::Until(a, b) => {
                    StateExpr::or(alit_expr(f, a), alit_expr(f, b))
                }
                PathNode::Next(_) => StateExpr::True,
            }
        }
    }
}

/// alit of the subformula rooted at `id`, as a boolean formula.
pub fn literal_projection(f: &Formula, id: NodeId) -> Formula {
    let expr = alit_expr(f, id);
    let fragment = if contains_or(&expr) {
        super::Fragment::Full
    } else {
        f.fragment()
    };
    Formula::from_expr(&expr, fragment).expect("alit of a valid formula is valid")
}

fn contains_or(e: &StateExpr) -> bool {
    match e {
        StateExpr::Or(..) => true,
        StateExpr::And(l, r) => contains_or(l) || contains_or(r),
        _ => false,
    }
}

pub fn alit(f: &Formula) -> Formula {
    literal_projection(f, f.root())
}

/// Evaluates alit(node) directly on a labeling.
pub fn alit_holds(f: &Formula, id: NodeId, label: &dyn Fn(&str) -> bool) -> bool {
    match f.node(id) {
        StateNode::True => true,
        StateNode::False => false,
        StateNode::Atom(a) => label(a),
        StateNode::NegAtom(a) => !label(a),
        StateNode::And(l, r) => alit_holds(f, *l, label) && alit_holds(f, *r, label),
        StateNode::Or(l, r) => alit_holds(f, *l, label) || alit_holds(f, *r, label),
        StateNode::ProbGeq { threshold, path } => {
            if *threshold == 0.0 {
                return true;
            }
            match f.path(*path) {
                PathNode::ContinuingWeakUntil(a, _) => alit_holds(f, a, label),
                PathNode::WeakUntil(a, b) | PathNode::Until(a, b) => {
                    alit_holds(f, a, label) || alit_holds(f, b, label)
                }
                PathNode::Next(_) => true,
            }
        }
    }
}

/// Evaluates a formula without probabilistic operators.
pub fn eval_boolean(f: &Formula, label: &dyn Fn(&str) -> bool) -> Result<bool, FormulaError> {
    if !f.is_boolean() {
        return Err(FormulaError::NotBoolean);
    }
    Ok(alit_holds(f, f.root(), label))
}

/// Replaces every threshold; `d` is indexed like the path table.
pub fn slater_transform(f: &Formula, d: &Thresholds) -> Result<Formula, FormulaError> {
    if d.values.len() != f.pf() {
        return Err(FormulaError::DimensionMismatch {
            expected: f.pf(),
            got: d.values.len(),
        });
    }
    if let Some(&bad) = d.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(FormulaError::InvalidThreshold(bad));
    }
    let mut g = f.clone();
    for node in &mut g.nodes {
        if let StateNode::ProbGeq { threshold, path } = node {
            *threshold = d.values[*path];
        }
    }
    Ok(g)
}

/// Canonical valuation: the largest `mu` consistent with `nu` at a state
/// with the given labels.
pub fn canonical_valuation(f: &Formula, label: &dyn Fn(&str) -> bool, nu: &[f64]) -> Vec<bool> {
    let mut mu = vec![false; f.sf()];
    for (id, node) in f.nodes().iter().enumerate() {
        mu[id] = match node {
            StateNode::True => true,
            StateNode::False => false,
            StateNode::Atom(a) => label(a),
            StateNode::NegAtom(a) => !label(a),
            StateNode::And(l, r) => mu[*l] && mu[*r],
            StateNode::Or(l, r) => mu[*l] || mu[*r],
            StateNode::ProbGeq { threshold, path } => nu[*path] >= threshold - TIE_TOLERANCE,
        };
    }
    mu
}

/// Nesting depth and total depth per node.
pub fn depths(f: &Formula) -> (Vec<usize>, Vec<usize>) {
    (
        (0..f.sf()).map(|i| f.depth_n(i)).collect(),
        (0..f.sf()).map(|i| f.depth_t(i)).collect(),
    )
}

fn fd_expr(e: &StateExpr) -> StateExpr {
    match e {
        StateExpr::True | StateExpr::False | StateExpr::Atom(_) | StateExpr::NegAtom(_) => {
            e.clone()
        }
        StateExpr::And(l, r) => StateExpr::and(fd_expr(l), fd_expr(r)),
        StateExpr::Or(l, r) => StateExpr::or(fd_expr(l), fd_expr(r)),
        StateExpr::Prob(p, path) => {
            let path = match path.as_ref() {
                PathExpr::ContinuingWeakUntil(a, b) => {
                    let fa = fd_expr(a);
                    let forever = StateExpr::always(1.0, a.clone());
                    let goal = StateExpr::or(forever, StateExpr::and(fa.clone(), fd_expr(b)));
                    PathExpr::Until(fa, goal)
                }
                PathExpr::WeakUntil(a, b) => PathExpr::WeakUntil(fd_expr(a), fd_expr(b)),
                PathExpr::Next(a) => PathExpr::Next(fd_expr(a)),
                PathExpr::Until(a, b) => PathExpr::Until(fd_expr(a), fd_expr(b)),
            };
            StateExpr::prob(*p, path)
        }
    }
}

/// Rewrites every continuing W into an until against an almost-sure-G
/// disjunct. The result admits `U` and disjunction and is meant for the
/// exact checker only.
pub fn fd_transform(f: &Formula) -> Formula {
    Formula::from_expr(&fd_expr(&f.to_expr()), super::Fragment::Full)
        .expect("FD output is a valid formula")
}
