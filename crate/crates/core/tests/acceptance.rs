//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion prints its own line; the process fails if any does.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use cpctl::engine::{max_achievable, run_vi, run_vi_until, EngineConfig, VIStatus};
use cpctl::formula::{
    fd_transform, literal_projection, parse_formula, Formula, Fragment, PathExpr, PathNode,
    StateExpr, StateNode,
};
use cpctl::model::{example1, gridworld, induce_chain, mixed_successors, Mdp, MemorylessPolicy, SlipTiers};
use cpctl::policy::{
    check_compatibility, extract_policy, AugmentedState, ValuedEntry, ValuedPolicy,
    DEFAULT_REACH_CAP,
};
use cpctl::verify::{
    check_thm1_chain, exact_check, greedy_policy, max_safety_vi,
    product_chain_check, simulate,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXAMPLE1_FORMULA: &str = "P>=2/3 [G P>=7/12 [G !a]]";
const GRID_FORMULA: &str = "P>=1 [G P>=0.6 [!d W (!d & G)]]";

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn cpctl(text: &str) -> Formula {
    parse_formula(text, Fragment::Cpctl).expect("test formula parses")
}

fn example1_policy(m: &Mdp, first: &str) -> MemorylessPolicy {
    let mut choice = vec![0; m.num_states()];
    choice[m.initial()] = m.action_index(m.initial(), first).unwrap();
    MemorylessPolicy::deterministic(m, &choice).unwrap()
}

fn criterion1() -> Outcome {
    let tol = 1e-9;
    let m = example1();
    let f = cpctl(EXAMPLE1_FORMULA);
    let s0 = m.initial();
    let r1 = exact_check(&induce_chain(&m, &example1_policy(&m, "a1")), &f).map_err(|e| e.to_string())?;
    let r2 = exact_check(&induce_chain(&m, &example1_policy(&m, "a4")), &f).map_err(|e| e.to_string())?;
    let mut failures = Vec::new();
    let mut want = |what: &str, got: f64, expect: f64| {
        if !close(got, expect, tol) {
            failures.push(format!("{what} = {got}, expected {expect}"));
        }
    };
    // Path 0 is the inner G !a, path 1 the outer G.
    want("P(G !a | pi1, s0)", r1.probability(0, s0), 0.75);
    want("P(phi | pi1, s0)", r1.probability(1, s0), 0.5);
    want("P(phi | pi2, s0)", r2.probability(1, s0), 2.0 / 3.0);

    // Annotated values of the inner objective at s1..s8, as a multiset.
    let mut got: Vec<f64> = (1..m.num_states()).map(|s| r1.probability(0, s)).collect();
    let mut expect = vec![0.75, 2.0 / 3.0, 1.0, 0.5, 1.0, 0.0, 0.0, 1.0];
    got.sort_by(f64::total_cmp);
    expect.sort_by(f64::total_cmp);
    if got.len() != expect.len() || got.iter().zip(&expect).any(|(a, b)| !close(*a, *b, tol)) {
        failures.push(format!("per-state inner values {got:?}, expected {expect:?}"));
    }

    let inner = f.owner(0);
    let sat: Vec<&str> = r1.sat_set(inner).into_iter().map(|s| m.state_name(s)).collect();
    let expect_sat = ["s0", "s1", "s2", "s5", "s6"];
    if sat != expect_sat {
        failures.push(format!(
            "sat set of P>=7/12 [G !a] under pi1 is {sat:?}, expected {expect_sat:?} \
             (s7 is an absorbing !a state, so its inner value is 1)"
        ));
    }
    if failures.is_empty() {
        Ok("3/4, 1/2, 2/3 and per-state values exact".into())
    } else {
        Err(failures.join("; "))
    }
}

fn criterion2() -> Outcome {
    let m = example1();
    let cfg = EngineConfig::default();
    let f = cpctl(EXAMPLE1_FORMULA);
    let r = run_vi(&m, &f, &cfg).map_err(|e| e.to_string())?;
    ensure(r.status == VIStatus::TargetMet, || format!("2/3 gave {:?}", r.status))?;
    let id = r.target_point.ok_or("no target point")?;
    let p = extract_policy(&m, &f, &r.frontiers, id).map_err(|e| e.to_string())?;
    let c = product_chain_check(&m, &p, &f).map_err(|e| e.to_string())?;
    let outer = c.initial_profile()[1];
    ensure(outer >= 2.0 / 3.0 - 1e-9, || format!("product P(phi) = {outer}"))?;
    let f7 = cpctl("P>=0.7 [G P>=7/12 [G !a]]");
    let r7 = run_vi(&m, &f7, &cfg).map_err(|e| e.to_string())?;
    ensure(r7.status == VIStatus::ConvergedTargetUnmet, || format!("0.7 gave {:?}", r7.status))?;
    Ok(format!("P(phi) = {outer} after {} iterations; 0.7 unmet", r.iterations))
}

/// Closed form for the witness chain: the inner objective holds at the root
/// iff (1-eps)*alpha >= 1/2; otherwise the outer one needs eps = 0 and the
/// inner objective at the middle state, i.e. alpha >= 1/2.
fn thm1_oracle(alpha: f64, eps: f64) -> bool {
    (1.0 - eps) * alpha >= 0.5 - 1e-12 || (eps == 0.0 && alpha >= 0.5 - 1e-12)
}

fn criterion3() -> Outcome {
    let mut mismatch = Vec::new();
    let mut oracle_disagree = Vec::new();
    for i in 0..=10 {
        let alpha = i as f64 / 10.0;
        for eps in [0.0, 0.01, 0.1] {
            let got = check_thm1_chain(alpha, eps).map_err(|e| e.to_string())?;
            if got != thm1_oracle(alpha, eps) {
                oracle_disagree.push(format!("({alpha}, {eps})"));
            }
            let expect = alpha >= 0.5 && eps == 0.0;
            if got != expect {
                mismatch.push(format!("({alpha}, {eps})"));
            }
        }
    }
    ensure(oracle_disagree.is_empty(), || {
        format!("checker disagrees with the closed form at {}", oracle_disagree.join(" "))
    })?;
    ensure(mismatch.is_empty(), || {
        format!(
            "satisfied but outside [1/2,1] x {{0}} at {} points: {} \
             (inner probability at the root is (1-eps)*alpha >= 1/2)",
            mismatch.len(),
            mismatch.join(" ")
        )
    })?;
    Ok("33 grid points match".into())
}

/// The random chain-and-formula suite shared by the two structural checks.
fn random_suite() -> Vec<(Mdp, Formula)> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    (0..200)
        .map(|_| {
            let n = rng.gen_range(1..=12);
            let m = common::random_chain(&mut rng, n);
            let f = common::random_cpctl(&mut rng, 3);
            (m, f)
        })
        .collect()
}

fn criterion4() -> Outcome {
    let mut cases = 0;
    let mut bad = Vec::new();
    for (k, (m, f)) in random_suite().iter().enumerate() {
        let chain = m.as_chain().expect("single-action model");
        for j in 0..f.pf() {
            let PathNode::ContinuingWeakUntil(l, r) = f.path(j) else {
                continue;
            };
            let (e1, e2) = (f.subexpr(l), f.subexpr(r));
            let direct = Formula::from_expr(
                &StateExpr::prob(1.0, PathExpr::ContinuingWeakUntil(e1.clone(), e2.clone())),
                Fragment::Cpctl,
            )
            .map_err(|e| e.to_string())?;
            let projected = Formula::from_expr(
                &StateExpr::prob(
                    1.0,
                    PathExpr::WeakUntil(literal_projection(f, l).to_expr(), StateExpr::and(e1, e2)),
                ),
                Fragment::Full,
            )
            .map_err(|e| e.to_string())?;
            let a = exact_check(&chain, &direct).map_err(|e| e.to_string())?;
            let b = exact_check(&chain, &projected).map_err(|e| e.to_string())?;
            for s in 0..chain.num_states() {
                cases += 1;
                if a.satisfied(s) != b.satisfied(s) {
                    bad.push(format!("model {k} path {j} state {s}"));
                }
            }
        }
    }
    ensure(bad.is_empty(), || format!("{} counterexamples, first {}", bad.len(), bad[0]))?;
    Ok(format!("{cases} state/path cases, no counterexample"))
}

fn criterion5() -> Outcome {
    let mut cases = 0;
    let mut bad = Vec::new();
    for (k, (m, f)) in random_suite().iter().enumerate() {
        let chain = m.as_chain().expect("single-action model");
        let a = exact_check(&chain, f).map_err(|e| e.to_string())?;
        let b = exact_check(&chain, &fd_transform(f)).map_err(|e| e.to_string())?;
        for s in 0..chain.num_states() {
            cases += 1;
            if a.satisfied(s) != b.satisfied(s) {
                bad.push(format!("model {k} state {s}: {f}"));
            }
        }
    }
    ensure(bad.is_empty(), || format!("{} counterexamples, first {}", bad.len(), bad[0]))?;
    Ok(format!("{cases} states, no counterexample"))
}

fn criterion6() -> Outcome {
    let mut policies = 0;
    let mut estimates = 0;
    let mut worst_gap = f64::INFINITY;
    let cases = [
        ("example1", example1(), cpctl(EXAMPLE1_FORMULA)),
        ("gridworld1", gridworld(1, SlipTiers::default()).unwrap(), cpctl(GRID_FORMULA)),
        ("gridworld2", gridworld(2, SlipTiers::default()).unwrap(), cpctl(GRID_FORMULA)),
    ];
    for (name, m, f) in &cases {
        let r = max_achievable(m, f, 1, &EngineConfig::default()).map_err(|e| e.to_string())?;
        let v = &r.result.frontiers;
        for &id in v.ids(m.initial()) {
            let p = extract_policy(m, f, v, id).map_err(|e| format!("{name}: {e}"))?;
            let c = product_chain_check(m, &p, f).map_err(|e| format!("{name}: {e}"))?;
            let exact = c.initial_profile();
            let nu = &v.point(id).nu;
            for j in 0..f.pf() {
                worst_gap = worst_gap.min(exact[j] - nu[j]);
                ensure(exact[j] >= nu[j] - 1e-9, || {
                    format!("{name}: path {j} exact {} below claimed {}", exact[j], nu[j])
                })?;
            }
            let sim = simulate(m, &p, f, 100_000, 200, 42).map_err(|e| e.to_string())?;
            for e in &sim {
                estimates += 1;
                ensure(e.contains(exact[e.path]), || {
                    format!(
                        "{name}: path {} interval [{}, {}] misses exact {}",
                        e.path, e.lower_ci, e.upper_ci, exact[e.path]
                    )
                })?;
            }
            policies += 1;
        }
    }
    Ok(format!(
        "{policies} policies dominate their points (min slack {worst_gap:.3e}); {estimates} intervals contain the exact values"
    ))
}

fn criterion7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = EngineConfig {
        convergence_delta: 1e-10,
        max_iters: 1_000_000,
        ..EngineConfig::default()
    };
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let n = rng.gen_range(1..=15);
        let m = common::random_mdp(&mut rng, n, 3);
        let p = [0.25, 0.5, 0.9, 1.0][rng.gen_range(0..4)];
        let f = cpctl(&format!("P>={p} [G b]"));
        let r = run_vi_until(&m, &f, &cfg, false).map_err(|e| e.to_string())?;
        ensure(r.status == VIStatus::ConvergedTargetUnmet, || format!("model {k}: {:?}", r.status))?;
        let engine = r.frontiers.points(m.initial()).map(|q| q.nu[0]).fold(0.0, f64::max);
        let vi = max_safety_vi(&m, &cpctl("b")).map_err(|e| e.to_string())?.values[m.initial()];
        worst = worst.max((engine - vi).abs());
        ensure(close(engine, vi, 1e-6), || format!("model {k}: engine {engine}, value iteration {vi}"))?;
    }
    Ok(format!("50 models, max difference {worst:.2e}"))
}

fn criterion8() -> Outcome {
    let f = cpctl(GRID_FORMULA);
    let mut notes = Vec::new();
    for variant in [1, 2] {
        let m = gridworld(variant, SlipTiers::default()).map_err(|e| e.to_string())?;
        let a = max_achievable(&m, &f, 1, &EngineConfig::default()).map_err(|e| e.to_string())?;
        let pts = &a.curve.points;
        ensure(!pts.is_empty(), || format!("variant {variant}: empty curve"))?;
        // (a) sorted by the inner counter, the outer one never increases.
        ensure(pts.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 >= w[1].1), || {
            format!("variant {variant}: curve not a nonincreasing staircase: {pts:?}")
        })?;
        // (b) every curve point is realised by a policy.
        let v = &a.result.frontiers;
        for &(x, y) in pts {
            let id = *v
                .ids(m.initial())
                .iter()
                .find(|&&id| v.point(id).nu[0] == x && v.point(id).nu[1] == y)
                .ok_or_else(|| format!("variant {variant}: curve point ({x}, {y}) not in the frontier"))?;
            let p = extract_policy(&m, &f, v, id).map_err(|e| e.to_string())?;
            let c = product_chain_check(&m, &p, &f).map_err(|e| e.to_string())?;
            let e = c.initial_profile();
            ensure(e[0] >= x - 1e-9 && e[1] >= y - 1e-9, || {
                format!("variant {variant}: ({x}, {y}) realised only as {e:?}")
            })?;
        }
        let best = pts.iter().map(|p| p.1).fold(0.0, f64::max);
        let safety = max_safety_vi(&m, &cpctl("!d")).map_err(|e| e.to_string())?;
        let greedy = greedy_policy(&m, &safety.values);
        let g = exact_check(&induce_chain(&m, &greedy), &f).map_err(|e| e.to_string())?;
        let greedy_outer = g.probability(1, m.initial());
        if variant == 1 {
            // (c) the safest policy is not the best one for the outer objective.
            ensure(best > greedy_outer, || {
                format!("variant 1: best outer {best} does not exceed greedy {greedy_outer}")
            })?;
        }
        notes.push(format!(
            "v{variant}: {} curve points, best outer {best:.5} vs greedy {greedy_outer:.5}",
            pts.len()
        ));
    }
    Ok(notes.join("; "))
}

fn counter_bound(m: &Mdp, f: &Formula, vp: &ValuedPolicy, k: usize, j: usize) -> f64 {
    let e = &vp.entries()[k];
    let (l, r) = match f.path(j) {
        PathNode::ContinuingWeakUntil(l, r) => (l, r),
        _ => return 1.0,
    };
    if !e.aug.mu[l] {
        return 0.0;
    }
    if e.aug.mu[r] {
        return 1.0;
    }
    mixed_successors(m, e.aug.state, &e.delta)
        .iter()
        .map(|&(t, p)| {
            let nk = e.theta.iter().find(|x| x.0 == t).expect("theta covers the support").1;
            p * vp.entries()[nk].aug.nu[j]
        })
        .sum()
}

/// A valuation bit is unsupported when the state clause for that node
/// would reject it.
fn unsupported_bits(m: &Mdp, f: &Formula, e: &AugmentedState) -> Vec<usize> {
    (0..f.sf())
        .filter(|&i| !e.mu[i])
        .filter(|&i| match f.node(i) {
            StateNode::False => true,
            StateNode::Atom(a) => !m.has_label(e.state, a),
            StateNode::NegAtom(a) => m.has_label(e.state, a),
            StateNode::And(l, r) => !(e.mu[*l] && e.mu[*r]),
            StateNode::ProbGeq { threshold, path } => e.nu[*path] < threshold - 1e-6,
            _ => false,
        })
        .collect()
}

fn mutate(rng: &mut ChaCha8Rng, m: &Mdp, f: &Formula, vp: &ValuedPolicy) -> Option<(usize, ValuedPolicy, String)> {
    let n = vp.entries().len();
    for _ in 0..50 {
        let k = rng.gen_range(0..n);
        let mut e: ValuedEntry = vp.entries()[k].clone();
        if rng.gen_bool(0.5) && f.pf() > 0 {
            let j = rng.gen_range(0..f.pf());
            let bound = counter_bound(m, f, vp, k, j);
            if bound + 0.01 <= 1.0 {
                e.aug.nu[j] = bound + 0.01;
                let bad = vp.with_entry(k, e);
                // A successor loop back to the entry moves the bound with it;
                // only keep raises that exceed the recomputed bound.
                let after = counter_bound(m, f, &bad, k, j);
                if bound + 0.01 > after + 1e-6 {
                    return Some((k, bad, format!("raise nu[{j}] past {after}")));
                }
            }
        } else if let Some(&i) = unsupported_bits(m, f, &e.aug).choose(rng) {
            e.aug.mu[i] = true;
            return Some((k, vp.with_entry(k, e), format!("set mu[{i}]")));
        }
    }
    None
}

fn criterion9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cfg = EngineConfig::default();
    let mut valid = 0;
    let mut rejected = 0;
    let mut attempts = 0;
    while valid < 100 {
        attempts += 1;
        ensure(attempts < 10_000, || "could not generate enough policies".into())?;
        let n = rng.gen_range(2..=8);
        let m = common::random_mdp(&mut rng, n, 3);
        let f = common::random_cpctl(&mut rng, 2);
        let Ok(r) = run_vi_until(&m, &f, &cfg, false) else {
            continue;
        };
        let ids = r.frontiers.ids(m.initial());
        let &id = ids.choose(&mut rng).expect("initial frontier is never empty");
        let p = extract_policy(&m, &f, &r.frontiers, id).map_err(|e| e.to_string())?;
        let vp = p.to_valued();
        let Some((k, bad, what)) = mutate(&mut rng, &m, &f, &vp) else {
            continue;
        };
        let report = check_compatibility(&m, &f, &vp, DEFAULT_REACH_CAP).map_err(|e| e.to_string())?;
        ensure(report.is_compatible(), || {
            format!("unmutated policy rejected: {}", report.violations[0])
        })?;
        valid += 1;
        let report = check_compatibility(&m, &f, &bad, DEFAULT_REACH_CAP).map_err(|e| e.to_string())?;
        ensure(report.violations.iter().any(|v| v.entry == k), || {
            format!("mutation '{what}' at entry {k} of {f} was not located")
        })?;
        rejected += 1;
    }
    Ok(format!("{valid} policies certify, {rejected} mutants rejected at the mutated entry"))
}

type Criterion = (&'static str, u64, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("example1 exact values", 1, criterion1),
        ("example1 synthesis", 5, criterion2),
        ("witness chain grid", 1, criterion3),
        ("literal projection", 30, criterion4),
        ("FD equivalence", 30, criterion5),
        ("soundness regression", 300, criterion6),
        ("flat formula cross-check", 120, criterion7),
        ("gridworld trade-off", 300, criterion8),
        ("compatibility mutations", 60, criterion9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let label = format!("criterion {} ({name})", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > Duration::from_secs(*budget) => {
                Err(format!("took {elapsed:.2?}, budget {budget}s"))
            }
            o => o,
        };
        match outcome {
            Ok(msg) => println!("{label}: PASS [{elapsed:.2?}] {msg}"),
            Err(msg) => {
                failed += 1;
                println!("{label}: FAIL [{elapsed:.2?}] {msg}");
            }
        }
    }
    println!("acceptance: {failed} of {ran} criteria failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
