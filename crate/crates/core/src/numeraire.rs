//! Change of numéraire to `Z~*` and the GKW decomposition under the
//! resulting probability.
//!
//! With `Y = (1/Z~*, S/Z~*)` and `P~` given by the density process
//! `Z~* Z* / E[(g*)^2]`, every component of `Y` is a `P~`-martingale, and the
//! hedging problem becomes the projection of `H / Z~*_T` onto integrals of
//! `Y`. Wealth processes correspond through `(theta . S) = (psi . Y) Z~*`.
//! Requires `g*` to be nowhere zero, so that `Z~* Z*` never vanishes.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::check::{martingale_defect, max_abs, Deviation, Tolerances, Verdict};
use crate::error::{MvhError, Result};
use crate::hedge::{random_strategy, HedgeDecomposition};
use crate::process::{
    conditional_expectation, gains, inner, integrate, AdaptedProcess, Claim, EdgeMeasure, Strategy, VectorProcess,
};
use crate::projection::nodewise_regression;
use crate::tree::EventTree;
use crate::vsmm::{VsmmBundle, ZERO_DENSITY_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumeraireFrame {
    /// `(1/Z~*, S^1/Z~*, ..., S^d/Z~*)` per node.
    pub y: VectorProcess,
    /// One-step probabilities of `P~`.
    pub ptilde: EdgeMeasure,
    /// Density process `Z~* Z* / E[(g*)^2]` of `P~`.
    pub density: AdaptedProcess,
}

pub fn build_frame(tree: &EventTree, bundle: &VsmmBundle) -> Result<NumeraireFrame> {
    let zero = ZERO_DENSITY_TOL * max_abs(&bundle.g_star.g);
    let vanishing = bundle.g_star.g.iter().filter(|x| x.abs() <= zero).count();
    if !bundle.flags.h3 || vanishing > 0 {
        return Err(MvhError::DensityVanishes { count: vanishing.max(1) });
    }
    let zt = &bundle.z_tilde;
    let zs = &bundle.z_star;
    let y = VectorProcess::from_fn(tree, tree.assets() + 1, |n| {
        let mut row = vec![1.0 / zt[n]];
        row.extend(tree.price(n).iter().map(|s| s / zt[n]));
        row
    });
    let mut w = vec![1.0; tree.len()];
    for &n in tree.non_terminals() {
        let base = zt[n] * zs[n];
        for &c in tree.children(n) {
            w[c] = tree.node(c).prob * zt[c] * zs[c] / base;
        }
    }
    let density = zt.zip_with(zs, |a, b| a * b / bundle.e_gstar_sq);
    Ok(NumeraireFrame { y, ptilde: EdgeMeasure::new(w), density })
}

/// `H / Z~*_T = mean_term + (psi^H . Y)_T + L^H_T` with `L^H` strongly
/// `P~`-orthogonal to `Y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GkwPtilde {
    pub psi_h: Strategy,
    pub l_h: AdaptedProcess,
    /// `M_t = E_P~[H / Z~*_T | F_t]`.
    pub m: AdaptedProcess,
    pub mean_term: f64,
}

pub fn gkw_ptilde(tree: &EventTree, claim: &Claim, frame: &NumeraireFrame, bundle: &VsmmBundle) -> Result<GkwPtilde> {
    let deflated: Vec<f64> = claim
        .payoff()
        .iter()
        .zip(tree.terminals())
        .map(|(h, &n)| h / bundle.z_tilde[n])
        .collect();
    let m = conditional_expectation(tree, &deflated, &frame.ptilde);
    let reg = nodewise_regression(tree, &m, &frame.y, &frame.ptilde)?;
    Ok(GkwPtilde { psi_h: reg.coefficients, l_h: reg.residual, mean_term: m[tree.root()], m })
}

/// Strategy in `S` with the same wealth as `psi` in `Y` after rescaling by
/// `Z~*`: `theta(n) = psi^{1..d}(n) + theta*(n) ((psi . Y)_n - psi(n) . Y_n)`.
pub fn psi_to_theta(tree: &EventTree, frame: &NumeraireFrame, psi: &Strategy, bundle: &VsmmBundle) -> Strategy {
    let wealth = integrate(tree, psi, &frame.y);
    Strategy::from_fn(tree, tree.assets(), |n| {
        let row = psi.at(n);
        let held: f64 = row.iter().zip(frame.y.at(n)).map(|(a, b)| a * b).sum();
        let gap = wealth[n] - held;
        row[1..].iter().zip(bundle.theta_star.at(n)).map(|(p, t)| p + t * gap).collect()
    })
}

/// Self-financing `Y`-strategy of a wealth process `G(theta)`:
/// `psi^0(n) = G_n(theta) - theta(n) . S_n`, `psi^i = theta^i`.
pub fn theta_to_psi(tree: &EventTree, theta: &Strategy) -> Strategy {
    let g = gains(tree, theta);
    Strategy::from_fn(tree, tree.assets() + 1, |n| {
        let row = theta.at(n);
        let held: f64 = row.iter().zip(tree.price(n)).map(|(a, b)| a * b).sum();
        let mut out = vec![g[n] - held];
        out.extend_from_slice(row);
        out
    })
}

#[allow(clippy::too_many_arguments)]
pub fn verify_numeraire(
    tree: &EventTree,
    claim: &Claim,
    bundle: &VsmmBundle,
    frame: &NumeraireFrame,
    gkw: &GkwPtilde,
    hedge: &HedgeDecomposition,
    ds: Option<&[Vec<f64>]>,
    tol: &Tolerances,
    rng: &mut impl Rng,
) -> Vec<Verdict> {
    let mut out = Vec::new();
    let pt = &frame.ptilde;
    let p = EdgeMeasure::physical(tree);
    let zt = &bundle.z_tilde;

    let mut ymart = Deviation::default();
    for i in 0..frame.y.dim() {
        let comp = frame.y.component(i);
        ymart.add(martingale_defect(tree, &comp, pt), comp.max_abs());
    }
    out.push(ymart.verdict("deflated_prices_ptilde_martingale", tol.identity));

    let mut norm = Deviation::default();
    let mut positive = true;
    for &n in tree.non_terminals() {
        let sum: f64 = tree.children(n).iter().map(|&c| pt.weight(c)).sum();
        norm.add(sum - 1.0, 1.0);
        positive &= tree.children(n).iter().all(|&c| pt.weight(c) > 0.0);
    }
    out.push(norm.verdict("ptilde_normalized", tol.identity));
    out.push(Verdict::decided("ptilde_positive", positive, 0.0, 0.0));
    out.push(Verdict::relative(
        "ptilde_density_starts_at_one",
        frame.density[tree.root()] - 1.0,
        1.0,
        tol.identity,
    ));

    if let Some(ds) = ds {
        let mut ratio = Deviation::default();
        for h in ds {
            let dens: Vec<f64> = bundle.g_star.g.iter().zip(h).map(|(a, b)| a + b).collect();
            let zg = conditional_expectation(tree, &dens, &p);
            let r = zg.zip_with(&bundle.z_star, |a, b| a / b);
            ratio.add(martingale_defect(tree, &r, pt), r.max_abs());
        }
        let unit = bundle.z_star.map(|_| 1.0);
        ratio.add(martingale_defect(tree, &unit, pt), 1.0);
        out.push(ratio.verdict("density_ratio_ptilde_martingale", tol.identity));
    }

    // norm transfer and the strategy correspondence on random pairs
    let mut norm_id = Deviation::default();
    let mut forward = Deviation::default();
    let mut backward = Deviation::default();
    let s_scale = max_abs(claim.payoff()).max(1.0);
    for _ in 0..5 {
        let h: Vec<f64> = (0..tree.terminals().len()).map(|_| rng.random_range(-1.0..1.0) * s_scale).collect();
        let theta = random_strategy(tree, tree.assets(), 1.0, rng);
        let psi = theta_to_psi(tree, &theta);
        let g = gains(tree, &theta);
        let w = integrate(tree, &psi, &frame.y);
        let err: Vec<f64> = h.iter().zip(g.terminal(tree)).map(|(a, b)| a - b).collect();
        let lhs = inner(tree, &err, &err);
        let rhs: f64 = tree
            .terminals()
            .iter()
            .zip(&h)
            .map(|(&n, hv)| frame.density[n] * tree.path_prob(n) * (hv / zt[n] - w[n]).powi(2))
            .sum::<f64>()
            * bundle.e_gstar_sq;
        norm_id.add(lhs - rhs, lhs);

        for n in 0..tree.len() {
            forward.add(w[n] * zt[n] - g[n], g.max_abs().max(1.0));
        }
        let back = psi_to_theta(tree, frame, &psi, bundle);
        for &n in tree.non_terminals() {
            for (a, b) in back.at(n).iter().zip(theta.at(n)) {
                forward.add(a - b, theta.max_abs());
            }
        }

        let psi2 = random_strategy(tree, tree.assets() + 1, 1.0 / zt.max_abs().max(1e-300), rng);
        let theta2 = psi_to_theta(tree, frame, &psi2, bundle);
        let g2 = gains(tree, &theta2);
        let w2 = integrate(tree, &psi2, &frame.y);
        let w3 = integrate(tree, &theta_to_psi(tree, &theta2), &frame.y);
        for n in 0..tree.len() {
            let scale = (w2[n] * zt[n]).abs().max(g2.max_abs());
            backward.add(g2[n] - w2[n] * zt[n], scale);
            backward.add((w3[n] - w2[n]) * zt[n], scale);
        }
    }
    out.push(norm_id.verdict("norm_transfer_identity", tol.identity));
    out.push(forward.verdict("strategy_correspondence_round_trip", tol.identity));
    out.push(backward.verdict("strategy_correspondence_wealth", tol.identity));

    // the GKW decomposition itself
    let psi_y = integrate(tree, &gkw.psi_h, &frame.y);
    let scale_l = gkw.m.max_abs();
    let mut split = Deviation::default();
    for &n in tree.terminals() {
        let target = claim.payoff()[tree.terminal_slot(n).expect("terminal")] / zt[n];
        split.add(target - gkw.mean_term - psi_y[n] - gkw.l_h[n], scale_l);
    }
    out.push(split.verdict("ptilde_gkw_decomposition", tol.identity));
    let mut strong = Deviation::default();
    for &n in tree.non_terminals() {
        for i in 0..frame.y.dim() {
            let cov: f64 = tree
                .children(n)
                .iter()
                .map(|&c| pt.weight(c) * (gkw.l_h[c] - gkw.l_h[n]) * (frame.y.at(c)[i] - frame.y.at(n)[i]))
                .sum();
            let dy = tree.children(n).iter().map(|&c| (frame.y.at(c)[i] - frame.y.at(n)[i]).abs()).fold(0.0, f64::max);
            strong.add(cov, scale_l * dy);
        }
    }
    strong.add(martingale_defect(tree, &gkw.l_h, pt), scale_l);
    strong.add(gkw.l_h[tree.root()], scale_l);
    out.push(strong.verdict("ptilde_gkw_strong_orthogonality", tol.identity));
    out.push(Verdict::relative(
        "ptilde_mean_equals_alpha",
        gkw.mean_term - hedge.alpha_h,
        hedge.alpha_h.abs().max(scale_l),
        tol.strict(),
    ));

    let theta_from_psi = psi_to_theta(tree, frame, &gkw.psi_h, bundle);
    let g_from_psi = gains(tree, &theta_from_psi);
    let g_h = gains(tree, &hedge.theta_h);
    let mut strat = Deviation::default();
    for n in 0..tree.len() {
        strat.add(g_from_psi[n] - g_h[n], g_h.max_abs().max(max_abs(claim.payoff())));
    }
    out.push(strat.verdict("hedge_from_ptilde_integrand", tol.identity));

    let mut resid = Deviation::default();
    for (s, &n) in tree.terminals().iter().enumerate() {
        resid.add(hedge.gh_minus_gstar[s] - gkw.l_h[n] * bundle.g_star.g[s], max_abs(claim.payoff()));
    }
    out.push(resid.verdict("hedge_residual_from_ptilde_residual", tol.identity));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::builtin_fixture;
    use crate::hedge::solve_mvh;
    use crate::projection::gains_basis;
    use crate::vsmm::{check_me_nonempty, compute_vsmm, ds_basis};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(name: &str) -> (EventTree, Claim, VsmmBundle, HedgeDecomposition, NumeraireFrame, GkwPtilde) {
        let (tree, claim) = builtin_fixture(name).unwrap();
        let basis = gains_basis(&tree);
        let bundle = compute_vsmm(&tree, &basis, &check_me_nonempty(&tree)).unwrap();
        let hedge = solve_mvh(&tree, &basis, &claim, &bundle);
        let frame = build_frame(&tree, &bundle).unwrap();
        let gkw = gkw_ptilde(&tree, &claim, &frame, &bundle).unwrap();
        (tree, claim, bundle, hedge, frame, gkw)
    }

    #[test]
    fn fixture_a_frame() {
        let (tree, _, bundle, _, frame, gkw) = setup("A");
        assert!((frame.ptilde.weight(1) - 0.2).abs() < 1e-14);
        assert!((frame.ptilde.weight(2) - 0.8).abs() < 1e-14);
        // Y_0 = (1, S_0) / E[(g*)^2] = (0.9, 3.6)
        assert!((frame.y.at(0)[0] - 0.9).abs() < 1e-15 && (frame.y.at(0)[1] - 3.6).abs() < 1e-14);
        assert!((gkw.mean_term - 0.9).abs() < 1e-13);
        assert!(gkw.l_h.max_abs() < 1e-13);
        let theta = psi_to_theta(&tree, &frame, &gkw.psi_h, &bundle);
        assert!((gains(&tree, &theta)[1] - 2.4).abs() < 1e-12);
    }

    #[test]
    fn fixture_b_ptilde_positive_with_signed_density() {
        let (tree, _, bundle, _, frame, _) = setup("B");
        assert!(!bundle.flags.qstar_equivalent);
        assert!(frame.ptilde.is_strictly_positive());
        let g = &bundle.g_star.g;
        let total: f64 = tree.terminals().iter().zip(g).map(|(&n, x)| tree.node(n).prob * x * x).sum();
        for (&n, x) in tree.terminals().iter().zip(g) {
            assert!((frame.ptilde.weight(n) - tree.node(n).prob * x * x / total).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_psi_gives_zero_theta() {
        let (tree, _, bundle, _, frame, _) = setup("C");
        let zero = Strategy::zeros(&tree, 2);
        assert_eq!(psi_to_theta(&tree, &frame, &zero, &bundle).max_abs(), 0.0);
    }

    #[test]
    fn manufactured_claim_recovers_integrand() {
        let (tree, _, bundle, _, frame, _) = setup("A");
        let psi0 = Strategy::constant(&tree, &[0.3, -0.2]);
        let w = integrate(&tree, &psi0, &frame.y);
        let h: Vec<f64> = tree.terminals().iter().map(|&n| bundle.z_tilde[n] * (1.5 + w[n])).collect();
        let gkw = gkw_ptilde(&tree, &Claim::new("m", h), &frame, &bundle).unwrap();
        assert!(gkw.l_h.max_abs() < 1e-13);
        assert!((gkw.mean_term - 1.5).abs() < 1e-13);
        // in the complete one-period model only psi . dY is identified
        let fit = integrate(&tree, &gkw.psi_h, &frame.y);
        for &n in tree.terminals() {
            assert!((fit[n] - w[n]).abs() < 1e-13);
        }
    }

    #[test]
    fn refuses_vanishing_density() {
        let (tree, _) = builtin_fixture("D").unwrap();
        let basis = gains_basis(&tree);
        let bundle = compute_vsmm(&tree, &basis, &check_me_nonempty(&tree)).unwrap();
        assert!(matches!(build_frame(&tree, &bundle), Err(MvhError::DensityVanishes { count: 1 })));
    }

    #[test]
    fn verdicts_pass_on_fixtures() {
        for name in ["A", "B", "C"] {
            let (tree, claim, bundle, hedge, frame, gkw) = setup(name);
            let ds = ds_basis(&tree, &gains_basis(&tree));
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for v in verify_numeraire(&tree, &claim, &bundle, &frame, &gkw, &hedge, Some(&ds), &Tolerances::default(), &mut rng) {
                assert!(v.passed, "{name}: {v:?}");
            }
        }
    }
}
