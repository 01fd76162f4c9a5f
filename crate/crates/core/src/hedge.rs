//! The mean-variance hedge and its orthogonal decomposition.
//!
//! For a claim `H`, minimizing `E[(H - G_T(theta))^2]` over strategies is the
//! projection of `H` onto the gains span. The residual splits further along
//! `g*` and the orthogonal complement of `span(gains) + R`:
//!
//! `H = G_T(theta^H) + alpha^H g* + (g^H - g*)`, with
//! `alpha^H = E[H g*] / E[(g*)^2]`, all three terms mutually orthogonal.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::check::{martingale_defect, max_abs, Deviation, Tolerances, Verdict};
use crate::process::{conditional_expectation, gains, hedging_error, inner, AdaptedProcess, Claim, EdgeMeasure, Strategy};
use crate::projection::{project_l2, GainsBasis};
use crate::tree::EventTree;
use crate::vsmm::{DensityElement, VsmmBundle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeDecomposition {
    pub theta_h: Strategy,
    pub alpha_h: f64,
    /// Terminal gains `G_T(theta^H)`.
    pub gains_terminal: Vec<f64>,
    /// `g^H - g*` per terminal node.
    pub gh_minus_gstar: Vec<f64>,
    /// `E[(H - G_T(theta^H))^2]` evaluated directly.
    pub objective: f64,
    /// The same quantity as `(alpha^H)^2 E[(g*)^2] + |g^H - g*|^2`.
    pub objective_pythagoras: f64,
}

impl HedgeDecomposition {
    /// The signed density `g^H = g* + (g^H - g*)`.
    pub fn g_h(&self, bundle: &VsmmBundle) -> DensityElement {
        DensityElement::new(bundle.g_star.g.iter().zip(&self.gh_minus_gstar).map(|(a, b)| a + b).collect())
    }
}

pub fn solve_mvh(tree: &EventTree, basis: &GainsBasis, claim: &Claim, bundle: &VsmmBundle) -> HedgeDecomposition {
    let h = claim.payoff();
    let proj = project_l2(tree, h, basis);
    let theta_h = basis.strategy(tree, &proj.coefficients);
    let g = &bundle.g_star.g;
    let alpha_h = inner(tree, h, g) / bundle.e_gstar_sq;
    let gh_minus_gstar: Vec<f64> = proj.residual.iter().zip(g).map(|(r, gs)| r - alpha_h * gs).collect();
    let objective = inner(tree, &proj.residual, &proj.residual);
    let objective_pythagoras =
        alpha_h * alpha_h * bundle.e_gstar_sq + inner(tree, &gh_minus_gstar, &gh_minus_gstar);
    HedgeDecomposition {
        theta_h,
        alpha_h,
        gains_terminal: proj.fitted,
        gh_minus_gstar,
        objective,
        objective_pythagoras,
    }
}

/// Membership of a strategy in the two admissibility classes: `(theta . S) Z^g`
/// a martingale for every signed martingale density `g` (checked on `g*`
/// and `g* + h` for the complement basis), and `(theta . S) Z*` a martingale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub theta_u: bool,
    pub theta_tilde: bool,
    /// Worst relative martingale defect across all densities tried.
    pub worst_defect: f64,
}

pub fn theta_u_membership(
    tree: &EventTree,
    theta: &Strategy,
    bundle: &VsmmBundle,
    ds: &[Vec<f64>],
    tol: f64,
) -> Membership {
    let p = EdgeMeasure::physical(tree);
    let g_process = gains(tree, theta);
    let defect = |z: &AdaptedProcess| {
        let prod = g_process.zip_with(z, |a, b| a * b);
        let scale = g_process.max_abs().max(1.0) * z.max_abs();
        crate::check::relative(martingale_defect(tree, &prod, &p), scale)
    };
    let tilde = defect(&bundle.z_star);
    let mut worst = tilde;
    for h in ds {
        let dens: Vec<f64> = bundle.g_star.g.iter().zip(h).map(|(a, b)| a + b).collect();
        worst = worst.max(defect(&conditional_expectation(tree, &dens, &p)));
    }
    Membership { theta_u: worst <= tol, theta_tilde: tilde <= tol, worst_defect: worst }
}

/// Random strategy with entries uniform in `[-scale, scale]`.
pub fn random_strategy(tree: &EventTree, dim: usize, scale: f64, rng: &mut impl Rng) -> Strategy {
    let mut s = Strategy::zeros(tree, dim);
    for &n in tree.non_terminals() {
        let row: Vec<f64> = (0..dim).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        s.set(n, &row);
    }
    s
}

#[allow(clippy::too_many_arguments)]
pub fn verify_hedge(
    tree: &EventTree,
    basis: &GainsBasis,
    claim: &Claim,
    bundle: &VsmmBundle,
    dec: &HedgeDecomposition,
    ds: Option<&[Vec<f64>]>,
    tol: &Tolerances,
    rng: &mut impl Rng,
) -> Vec<Verdict> {
    let mut out = Vec::new();
    let h = claim.payoff();
    let g = &bundle.g_star.g;
    let h_sq = inner(tree, h, h);
    let gt = &dec.gains_terminal;
    let rest = &dec.gh_minus_gstar;
    let alpha_g: Vec<f64> = g.iter().map(|x| dec.alpha_h * x).collect();

    let mut orth = Deviation::default();
    orth.add(inner(tree, gt, g), h_sq);
    orth.add(inner(tree, gt, rest), h_sq);
    orth.add(inner(tree, g, rest), h_sq);
    out.push(orth.verdict("hedge_orthogonality", tol.identity));

    let pyth = inner(tree, gt, gt) + dec.alpha_h * dec.alpha_h * bundle.e_gstar_sq + inner(tree, rest, rest);
    out.push(Verdict::relative("hedge_pythagoras", h_sq - pyth, h_sq, tol.identity));
    out.push(Verdict::relative(
        "hedge_objective_consistency",
        dec.objective - dec.objective_pythagoras,
        dec.objective.max(dec.objective_pythagoras).max(f64::MIN_POSITIVE),
        tol.oracle,
    ));

    let mut sum = Deviation::default();
    for s in 0..h.len() {
        sum.add(gt[s] + alpha_g[s] + rest[s] - h[s], max_abs(h));
    }
    let direct = gains(tree, &dec.theta_h).terminal(tree);
    for (a, b) in direct.iter().zip(gt) {
        sum.add(a - b, max_abs(h));
    }
    out.push(sum.verdict("hedge_components_sum_to_claim", tol.identity));

    let (mean, orth_g) = dec.g_h(bundle).constraint_defect(tree, basis);
    out.push(Verdict::relative("gh_density_constraints", mean.max(orth_g), 1.0, tol.identity));

    // every perturbation of theta^H raises the error by exactly |G_T(delta)|^2
    let scale = 0.1 * (1.0 + dec.theta_h.max_abs());
    let mut increased = 0;
    let mut excess = Deviation::default();
    for _ in 0..50 {
        let delta = random_strategy(tree, tree.assets(), scale, rng);
        let trial = hedging_error(tree, claim, &dec.theta_h.combine(1.0, &delta, 1.0), 0.0);
        let gd = gains(tree, &delta).terminal(tree);
        let expected = inner(tree, &gd, &gd);
        if trial > dec.objective {
            increased += 1;
        }
        excess.add(trial - dec.objective - expected, trial.max(h_sq));
    }
    out.push(Verdict::decided(
        "hedge_perturbations_increase_objective",
        increased == 50,
        (50 - increased) as f64,
        0.0,
    ));
    out.push(excess.verdict("hedge_perturbation_excess_is_gains_norm", tol.identity));

    if let Some(ds) = ds {
        let m_h = theta_u_membership(tree, &dec.theta_h, bundle, ds, tol.identity);
        let m_star = theta_u_membership(tree, &bundle.theta_star, bundle, ds, tol.identity);
        out.push(Verdict::decided(
            "optimal_strategies_admissible",
            m_h.theta_u && m_h.theta_tilde && m_star.theta_u && m_star.theta_tilde,
            m_h.worst_defect.max(m_star.worst_defect),
            tol.identity,
        ));
        if bundle.flags.h3 {
            let mut agree = true;
            let mut worst: f64 = 0.0;
            for _ in 0..20 {
                let theta = random_strategy(tree, tree.assets(), 1.0, rng);
                let m = theta_u_membership(tree, &theta, bundle, ds, tol.identity);
                agree &= m.theta_u == m.theta_tilde;
                worst = worst.max(m.worst_defect);
            }
            out.push(Verdict::decided("admissibility_classes_coincide", agree, worst, tol.identity));
        }
    }
    out
}
