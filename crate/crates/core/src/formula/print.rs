use std::fmt;

use super::{PathExpr, StateExpr};

fn is_compound(e: &StateExpr) -> bool {
    matches!(e, StateExpr::And(..) | StateExpr::Or(..))
}

fn operand(f: &mut fmt::Formatter<'_>, e: &StateExpr) -> fmt::Result {
    if is_compound(e) {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for StateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateExpr::True => f.write_str("true"),
            StateExpr::False => f.write_str("false"),
            StateExpr::Atom(a) => f.write_str(a),
            StateExpr::NegAtom(a) => write!(f, "!{a}"),
            StateExpr::And(l, r) => {
                // & is left-associative; Or binds looser.
                if matches!(**l, StateExpr::Or(..)) {
                    write!(f, "({l})")?;
                } else {
                    write!(f, "{l}")?;
                }
                f.write_str(" & ")?;
                operand(f, r)
            }
            StateExpr::Or(l, r) => {
                write!(f, "{l} | ")?;
                if matches!(**r, StateExpr::Or(..)) {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
            StateExpr::Prob(p, path) => write!(f, "P>={p} [{path}]"),
        }
    }
}

impl fmt::Display for PathExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathExpr::Next(a) => {
                f.write_str("X ")?;
                operand(f, a)
            }
            PathExpr::ContinuingWeakUntil(a, StateExpr::False) => {
                f.write_str("G ")?;
                operand(f, a)
            }
            PathExpr::ContinuingWeakUntil(a, b) => {
                operand(f, a)?;
                let goal = StateExpr::and(a.clone(), b.clone());
                write!(f, " W ({goal})")
            }
            PathExpr::WeakUntil(a, b) => {
                operand(f, a)?;
                f.write_str(" W ")?;
                operand(f, b)
            }
            PathExpr::Until(a, b) => {
                operand(f, a)?;
                f.write_str(" U ")?;
                operand(f, b)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::formula::{parse_formula, Fragment};

    #[test]
    fn prints_canonical_text() {
        let f = parse_formula("P>=2/3 [G P>=7/12 [G !a]]", Fragment::Cpctl).unwrap();
        assert_eq!(
            f.to_string(),
            "P>=0.6666666666666666 [G P>=0.5833333333333334 [G !a]]"
        );
        let f = parse_formula("P>=0.6 [ !d W (!d & G) ]", Fragment::Cpctl).unwrap();
        assert_eq!(f.to_string(), "P>=0.6 [!d W (!d & G)]");
        let f = parse_formula("a & (b & c)", Fragment::Cpctl).unwrap();
        assert_eq!(f.to_string(), "a & (b & c)");
    }

    #[test]
    fn reparse_is_identity() {
        for text in [
            "P>=1 [ (a & b) W ((a & b) & c) ]",
            "P>=0.25 [ a W (b & a) ]",
            "P>=1 [ G (a & P>=0.5 [ G b ]) ]",
            "P>=0 [ a W (a & true) ]",
        ] {
            let f = parse_formula(text, Fragment::Cpctl).unwrap();
            let g = parse_formula(&f.to_string(), Fragment::Cpctl).unwrap();
            assert_eq!(f, g, "{text}");
        }
        for text in ["P>=0.5 [ X (a & b) ]", "P>=0.5 [ a W a & b ]", "P>=1 [ G W G ]"] {
            let f = parse_formula(text, Fragment::SafePctl).unwrap();
            let g = parse_formula(&f.to_string(), Fragment::SafePctl).unwrap();
            assert_eq!(f, g, "{text}");
        }
    }
}
