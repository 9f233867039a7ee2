mod common;

use cpctl::engine::{run_vi_until, EngineConfig};
use cpctl::formula::{
    alit_holds, canonical_valuation, literal_projection, parse_formula, Formula, Fragment, PathExpr,
    PathNode, StateExpr,
};
use cpctl::frontier::{dominates, prune_maximal, FrontierPoint};
use cpctl::model::{load_model, save_model};
use cpctl::policy::extract_policy;
use cpctl::verify::{exact_check, product_chain, product_chain_check};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_points(r: &mut ChaCha8Rng, dim_mu: usize, dim_nu: usize, n: usize) -> Vec<FrontierPoint> {
    (0..n)
        .map(|_| {
            let mu = (0..dim_mu).map(|_| r.gen_bool(0.5)).collect();
            // A coarse grid so that ties and duplicates occur.
            let nu = (0..dim_nu).map(|_| r.gen_range(0..=8) as f64 / 8.0).collect();
            FrontierPoint::new(mu, nu)
        })
        .collect()
}

fn key(p: &FrontierPoint) -> (Vec<bool>, Vec<u64>) {
    (p.mu.clone(), p.nu.iter().map(|x| x.to_bits()).collect())
}

fn keys(ps: &[FrontierPoint]) -> Vec<(Vec<bool>, Vec<u64>)> {
    let mut k: Vec<_> = ps.iter().map(key).collect();
    k.sort();
    k
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn print_parse_round_trip(seed in any::<u64>()) {
        let f = common::random_cpctl(&mut rng(seed), 3);
        let text = f.to_string();
        let g = parse_formula(&text, Fragment::Cpctl).unwrap();
        prop_assert_eq!(g.to_expr(), f.to_expr(), "{}", text);
        prop_assert_eq!(g.to_string(), text);
    }

    #[test]
    fn canonical_valuation_is_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = common::random_cpctl(&mut r, 3);
        let labels: Vec<&str> = common::ATOMS.iter().copied().filter(|_| r.gen_bool(0.5)).collect();
        let label = |a: &str| labels.contains(&a);
        let lo: Vec<f64> = (0..f.pf()).map(|_| r.gen::<f64>()).collect();
        let hi: Vec<f64> = lo.iter().map(|x| (x + r.gen::<f64>() * 0.5).min(1.0)).collect();
        let a = canonical_valuation(&f, &label, &lo);
        let b = canonical_valuation(&f, &label, &hi);
        prop_assert!(a.iter().zip(&b).all(|(x, y)| !x || *y));
    }

    #[test]
    fn prune_is_idempotent_and_order_free(seed in any::<u64>(), eps in prop_oneof![Just(0.0), Just(0.05)]) {
        let mut r = rng(seed);
        let pts = random_points(&mut r, 2, 2, 40);
        let once = prune_maximal(pts.clone(), eps, usize::MAX);
        let twice = prune_maximal(once.clone(), eps, usize::MAX);
        prop_assert_eq!(keys(&once), keys(&twice));
        let mut shuffled = pts.clone();
        shuffled.shuffle(&mut r);
        prop_assert_eq!(keys(&once), keys(&prune_maximal(shuffled, eps, usize::MAX)));
        if eps == 0.0 {
            for p in &pts {
                prop_assert!(once.iter().any(|q| key(q) == key(p) || dominates(q, p)));
            }
            for (i, p) in once.iter().enumerate() {
                prop_assert!(once.iter().enumerate().all(|(j, q)| i == j || !dominates(q, p)));
            }
        }
    }

    #[test]
    fn prune_respects_the_cap(seed in any::<u64>(), cap in 1usize..6) {
        let pts = random_points(&mut rng(seed), 1, 3, 60);
        prop_assert!(prune_maximal(pts, 0.0, cap).len() <= cap);
    }

    #[test]
    fn model_file_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=10);
        let m = common::random_mdp(&mut r, n, 3);
        let back = load_model(&save_model(&m)).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn almost_sure_continuing_until_needs_held_literals(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=12);
        let chain = common::random_chain(&mut r, n).as_chain().unwrap();
        let f = common::random_cpctl(&mut r, 3);
        let PathNode::ContinuingWeakUntil(l, rr) = f.path(f.pf() - 1) else { unreachable!() };
        let (e1, e2) = (f.subexpr(l), f.subexpr(rr));
        let direct = Formula::from_expr(
            &StateExpr::prob(1.0, PathExpr::ContinuingWeakUntil(e1.clone(), e2.clone())),
            Fragment::Cpctl,
        ).unwrap();
        let projected = Formula::from_expr(
            &StateExpr::prob(1.0, PathExpr::WeakUntil(literal_projection(&f, l).to_expr(), StateExpr::and(e1, e2))),
            Fragment::Full,
        ).unwrap();
        let a = exact_check(&chain, &direct).unwrap();
        let b = exact_check(&chain, &projected).unwrap();
        for s in 0..chain.num_states() {
            prop_assert_eq!(a.satisfied(s), b.satisfied(s), "state {} of {}", s, f);
            // A state satisfying the whole formula satisfies its literal projection.
            if a.satisfied(s) {
                let label = |x: &str| chain.has_label(s, x);
                prop_assert!(alit_holds(&direct, direct.root(), &label));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Extracted policies are sound for the point they were built from and
    /// never lose probability mass.
    #[test]
    fn extracted_policies_are_sound(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=8);
        let m = common::random_mdp(&mut r, n, 3);
        let f = common::random_cpctl(&mut r, 2);
        let res = run_vi_until(&m, &f, &EngineConfig::default(), false).unwrap();
        for &id in res.frontiers.ids(m.initial()) {
            let p = extract_policy(&m, &f, &res.frontiers, id).unwrap();
            let product = product_chain(&m, &p).unwrap();
            for row in product.chain.rows() {
                let total: f64 = row.iter().map(|e| e.1).sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
            }
            let c = product_chain_check(&m, &p, &f).unwrap();
            let exact = c.initial_profile();
            let nu = &res.frontiers.point(id).nu;
            for j in 0..f.pf() {
                prop_assert!(exact[j] >= nu[j] - 1e-9, "{}: path {} exact {} < {}", f, j, exact[j], nu[j]);
            }
            prop_assert!(c.shortfalls(&p).is_empty());
        }
    }
}
