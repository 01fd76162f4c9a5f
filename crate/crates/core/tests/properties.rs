//! Property-based invariants over generated trees.

use mvh::analysis::analyze;
use mvh::check::Tolerances;
use mvh::generate::{generate_random_tree, random_claims, GeneratorConfig};
use mvh::hedge::{random_strategy, solve_mvh};
use mvh::process::{conditional_expectation, expectation, gains, EdgeMeasure};
use mvh::projection::gains_basis;
use mvh::tree::EventTree;
use mvh::vsmm::{check_me_nonempty, compute_vsmm};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tree_strategy() -> impl Strategy<Value = (EventTree, u64)> {
    (any::<u64>(), 1usize..=3, 2usize..=4, 1usize..=3, any::<bool>()).prop_map(|(seed, depth, branching, assets, inc)| {
        let mut cfg = GeneratorConfig::new(seed, depth, branching, assets);
        cfg.force_incomplete = inc;
        (generate_random_tree(&cfg).unwrap(), seed)
    })
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gains_are_linear_in_the_strategy((tree, seed) in tree_strategy(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t1 = random_strategy(&tree, tree.assets(), 1.0, &mut rng);
        let t2 = random_strategy(&tree, tree.assets(), 1.0, &mut rng);
        let lhs = gains(&tree, &t1.combine(a, &t2, b));
        let (g1, g2) = (gains(&tree, &t1), gains(&tree, &t2));
        let scale = 1.0 + lhs.max_abs();
        for n in 0..tree.len() {
            prop_assert!(rel(lhs[n], a * g1[n] + b * g2[n], scale) < 1e-12);
        }
        prop_assert_eq!(lhs[tree.root()], 0.0);
    }

    #[test]
    fn conditional_expectation_is_idempotent((tree, seed) in tree_strategy()) {
        let claim = &random_claims(&tree, seed)[0];
        let p = EdgeMeasure::physical(&tree);
        let once = conditional_expectation(&tree, claim.payoff(), &p);
        let twice = conditional_expectation(&tree, &once.terminal(&tree), &p);
        prop_assert_eq!(&once, &twice);
        let scale = once.max_abs();
        prop_assert!(rel(once[tree.root()], expectation(&tree, claim.payoff()), scale) < 1e-12);
        // the tower property at every node
        for &n in tree.non_terminals() {
            let kids: f64 = tree.children(n).iter().map(|&c| tree.node(c).prob * once[c]).sum();
            prop_assert!(rel(once[n], kids, scale) < 1e-12);
        }
    }

    #[test]
    fn constants_are_fixed_by_conditional_expectation((tree, _) in tree_strategy(), c in -5.0f64..5.0) {
        let ones = vec![c; tree.terminals().len()];
        let e = conditional_expectation(&tree, &ones, &EdgeMeasure::physical(&tree));
        for n in 0..tree.len() {
            prop_assert!((e[n] - c).abs() <= 1e-12 * c.abs().max(1.0));
        }
    }

    #[test]
    fn price_scaling_keeps_density_and_divides_theta_star((tree, _) in tree_strategy()) {
        let lambda = 7.0;
        let scaled = tree.map_prices(|s| s.iter().map(|x| lambda * x).collect()).unwrap();
        let solve = |t: &EventTree| {
            let basis = gains_basis(t);
            compute_vsmm(t, &basis, &check_me_nonempty(t)).unwrap()
        };
        let (b, bs) = (solve(&tree), solve(&scaled));
        let gs = b.g_star.g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (x, y) in b.g_star.g.iter().zip(&bs.g_star.g) {
            prop_assert!(rel(*x, *y, gs) < 1e-9);
        }
        let ts = b.theta_star.max_abs();
        for &n in tree.non_terminals() {
            for (x, y) in b.theta_star.at(n).iter().zip(bs.theta_star.at(n)) {
                prop_assert!(rel(x / lambda, *y, ts / lambda) < 1e-9);
            }
        }
    }

    #[test]
    fn hedge_is_linear_in_the_claim((tree, seed) in tree_strategy(), k in -4.0f64..4.0) {
        let claims = random_claims(&tree, seed);
        let basis = gains_basis(&tree);
        let bundle = compute_vsmm(&tree, &basis, &check_me_nonempty(&tree)).unwrap();
        let (h1, h2) = (&claims[0], &claims[1]);
        let sum = mvh::process::Claim::new(
            "sum",
            h1.payoff().iter().zip(h2.payoff()).map(|(a, b)| a + k * b).collect(),
        );
        let (d1, d2, ds) =
            (solve_mvh(&tree, &basis, h1, &bundle), solve_mvh(&tree, &basis, h2, &bundle), solve_mvh(&tree, &basis, &sum, &bundle));
        let scale = 1.0 + d1.alpha_h.abs() + k.abs() * d2.alpha_h.abs();
        prop_assert!(rel(ds.alpha_h, d1.alpha_h + k * d2.alpha_h, scale) < 1e-9);
        let (g1, g2, gs) = (gains(&tree, &d1.theta_h), gains(&tree, &d2.theta_h), gains(&tree, &ds.theta_h));
        let gscale = 1.0 + g1.max_abs() + k.abs() * g2.max_abs();
        for n in 0..tree.len() {
            prop_assert!(rel(gs[n], g1[n] + k * g2[n], gscale) < 1e-9);
        }
    }

    #[test]
    fn available_sections_match_hypothesis_flags((tree, seed) in tree_strategy()) {
        let tol = Tolerances::default();
        for claim in random_claims(&tree, seed) {
            let a = analyze(&tree, &claim, &tol);
            let b = a.vsmm.as_ref().unwrap();
            prop_assert_eq!(b.flags.qstar_equivalent, a.qstar.is_some());
            prop_assert_eq!(b.flags.h3, a.numeraire.is_some());
            prop_assert!(b.flags.h2);
        }
    }
}
