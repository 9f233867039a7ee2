use super::{gridworld, Mdp, ModelError, SlipTiers, StateSpec};

fn state(name: &str, labels: &[&str], actions: &[(&str, &[(&str, f64)])]) -> StateSpec {
    StateSpec {
        name: name.into(),
        labels: labels.iter().map(|s| s.to_string()).collect(),
        reward: 0.0,
        actions: actions
            .iter()
            .map(|(a, to)| {
                (
                    a.to_string(),
                    to.iter().map(|(t, p)| (t.to_string(), *p)).collect(),
                )
            })
            .collect(),
    }
}

fn sink(name: &str, labels: &[&str]) -> StateSpec {
    state(name, labels, &[("loop", &[(name, 1.0)])])
}

/// The nine-state MDP of the nested-objective example.
///
/// The atom `a` marks s4 and s8; with that labeling the per-state values of
/// `P(G !a)` at s1..s8 are 3/4, 1, 1/2, 0, 1, 2/3, 1, 0.
pub fn example1() -> Mdp {
    let states = vec![
        state("s0", &[], &[("a1", &[("s1", 1.0)]), ("a4", &[("s6", 1.0)])]),
        state("s1", &[], &[("a2", &[("s2", 0.5), ("s3", 0.5)])]),
        sink("s2", &[]),
        state("s3", &[], &[("a3", &[("s4", 0.5), ("s5", 0.5)])]),
        sink("s4", &["a"]),
        sink("s5", &[]),
        state("s6", &[], &[("a5", &[("s7", 2.0 / 3.0), ("s8", 1.0 / 3.0)])]),
        sink("s7", &[]),
        sink("s8", &["a"]),
    ];
    Mdp::new(vec!["a".into()], "s0", states).expect("example1 is well formed")
}

/// The five-state chain used to separate nested from flat formulas:
/// `root -(1-eps)-> l -(alpha)-> ll {c,a}`, `l -(1-alpha)-> lr {b}`,
/// `root -(eps)-> r {}`; leaves are self-loops.
pub fn thm1_chain(alpha: f64, eps: f64) -> Result<Mdp, ModelError> {
    for (name, v) in [("alpha", alpha), ("eps", eps)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(ModelError::InvalidParameter(format!("{name} = {v} is outside [0, 1]")));
        }
    }
    let states = vec![
        state("root", &["c"], &[("go", &[("l", 1.0 - eps), ("r", eps)])]),
        state("l", &["c"], &[("go", &[("ll", alpha), ("lr", 1.0 - alpha)])]),
        sink("r", &[]),
        sink("ll", &["c", "a"]),
        sink("lr", &["b"]),
    ];
    Mdp::new(vec!["a".into(), "b".into(), "c".into()], "root", states)
}

/// Resolves `example1`, `thm1` (with `alpha`, `eps`), `gridworld1`, `gridworld2`.
pub fn builtin_model(name: &str, alpha: f64, eps: f64, tiers: SlipTiers) -> Result<Mdp, ModelError> {
    match name {
        "example1" => Ok(example1()),
        "thm1" | "thm1chain" => thm1_chain(alpha, eps),
        "gridworld1" => gridworld(1, tiers),
        "gridworld2" => gridworld(2, tiers),
        _ => Err(ModelError::UnknownBuiltin(name.into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example1_structure() {
        let m = example1();
        assert_eq!(m.num_states(), 9);
        let s6 = m.state_index("s6").unwrap();
        let s7 = m.state_index("s7").unwrap();
        assert_eq!(m.actions(s6)[0].transitions[0], (s7, 2.0 / 3.0));
        let labeled: Vec<_> = (0..9).filter(|&s| m.has_label(s, "a")).map(|s| m.state_name(s)).collect();
        assert_eq!(labeled, ["s4", "s8"]);
    }

    #[test]
    fn thm1_structure() {
        let m = thm1_chain(0.5, 0.0).unwrap();
        let root = m.initial();
        assert_eq!(m.labeling().label_names(root), ["c"]);
        let ll = m.state_index("ll").unwrap();
        assert_eq!(m.labeling().label_names(ll), ["a", "c"]);
        let m = thm1_chain(0.3, 0.2).unwrap();
        let r = m.state_index("r").unwrap();
        assert!(m.labeling().label_names(r).is_empty());
        assert!(m.actions(root)[0].transitions.contains(&(r, 0.2)));
        assert!(thm1_chain(1.5, 0.0).is_err());
        assert!(builtin_model("nope", 0.0, 0.0, SlipTiers::default()).is_err());
    }
}
