//! Decompositions built on the VSMM `Q*` and the feedback form of the hedge.
//!
//! `V^H_t = E[H Z*_T | F_t] / Z*_t` splits as `V^H = V^H_0 + (phi^H . S) + K^H`
//! with `phi^H = theta^H + alpha^H theta*` and `K^H = L^H Z~*`. When `Q*` is
//! itself an equivalent measure, GKW decompositions of `V^H` and of
//! `J^H = sum Z~* dL^H` under `Q*` give the feedback equation
//! `theta^H = eta^H - eta^J - theta*/Z~*_- (V^H_- - G_-(theta^H))`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::check::{martingale_defect, max_abs, Deviation, Tolerances, Verdict};
use crate::error::{MvhError, Result};
use crate::hedge::{random_strategy, HedgeDecomposition};
use crate::linalg::{weighted_min_norm_lstsq, Mat};
use crate::numeraire::GkwPtilde;
use crate::process::{
    conditional_expectation, gains, hedging_error, inner, AdaptedProcess, Claim, EdgeMeasure, Strategy, VectorProcess,
};
use crate::projection::{nodewise_regression, GainsBasis};
use crate::tree::EventTree;
use crate::vsmm::{VsmmBundle, ZERO_DENSITY_TOL};

/// `E[X g* | F_t] / Z*_t` for a terminal vector `X`; refuses where `Z*`
/// vanishes.
fn conditional_under_vsmm(tree: &EventTree, x: &[f64], bundle: &VsmmBundle) -> Result<AdaptedProcess> {
    let zero = ZERO_DENSITY_TOL * bundle.z_star.max_abs();
    let vanishing = bundle.z_star.values().iter().filter(|z| z.abs() <= zero).count();
    if vanishing > 0 {
        return Err(MvhError::DensityVanishes { count: vanishing });
    }
    let weighted: Vec<f64> = x.iter().zip(&bundle.g_star.g).map(|(a, g)| a * g).collect();
    let num = conditional_expectation(tree, &weighted, &EdgeMeasure::physical(tree));
    Ok(num.zip_with(&bundle.z_star, |a, b| a / b))
}

/// `V^H_t = E[H Z*_T | F_t] / Z*_t`.
pub fn compute_v(tree: &EventTree, claim: &Claim, bundle: &VsmmBundle) -> Result<AdaptedProcess> {
    conditional_under_vsmm(tree, claim.payoff(), bundle)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VsmmDecomposition {
    pub v_h: AdaptedProcess,
    pub phi_h: Strategy,
    /// `K^H_t = E[(g^H - g*) Z*_T | F_t] / Z*_t`.
    pub k_h: AdaptedProcess,
    /// `K^H = L^H Z~*`, the second construction.
    pub k_h_from_l: AdaptedProcess,
    pub v0: f64,
}

pub fn decompose_v(
    tree: &EventTree,
    claim: &Claim,
    bundle: &VsmmBundle,
    hedge: &HedgeDecomposition,
    gkw: &GkwPtilde,
) -> Result<VsmmDecomposition> {
    let v_h = compute_v(tree, claim, bundle)?;
    let phi_h = hedge.theta_h.combine(1.0, &bundle.theta_star, hedge.alpha_h);
    let k_h = conditional_under_vsmm(tree, &hedge.gh_minus_gstar, bundle)?;
    let k_h_from_l = gkw.l_h.zip_with(&bundle.z_tilde, |l, z| l * z);
    Ok(VsmmDecomposition { v0: v_h[tree.root()], v_h, phi_h, k_h, k_h_from_l })
}

/// One-step weights `q(c|n) = p(c|n) Z*_c / Z*_n` of `Q*`; refuses when
/// `g*` is not strictly positive.
pub fn qstar_measure(tree: &EventTree, bundle: &VsmmBundle) -> Result<EdgeMeasure> {
    if !bundle.flags.qstar_equivalent {
        return Err(MvhError::SignedVsmm);
    }
    let z = &bundle.z_star;
    let mut w = vec![1.0; tree.len()];
    for &n in tree.non_terminals() {
        for &c in tree.children(n) {
            w[c] = tree.node(c).prob * z[c] / z[n];
        }
    }
    Ok(EdgeMeasure::new(w))
}

/// GKW decomposition of a `Q*`-martingale `M` against `S`:
/// `M = M_0 + (eta . S) + N`.
pub fn gkw_qstar(tree: &EventTree, m: &AdaptedProcess, q: &EdgeMeasure) -> Result<(Strategy, AdaptedProcess)> {
    let reg = nodewise_regression(tree, m, &VectorProcess::prices(tree), q)?;
    Ok((reg.coefficients, reg.residual))
}

/// `J^H` in increment form `sum Z~*_s dL^H_s`, and in the raw form
/// `L^H Z~* - (L^H_- . Z~*)`.
pub fn compute_j(tree: &EventTree, l_h: &AdaptedProcess, z_tilde: &AdaptedProcess) -> (AdaptedProcess, AdaptedProcess) {
    let mut j = AdaptedProcess::zeros(tree);
    let mut integral = AdaptedProcess::zeros(tree);
    let mut raw = AdaptedProcess::zeros(tree);
    for &n in tree.non_terminals() {
        for &c in tree.children(n) {
            j.set(c, j[n] + z_tilde[c] * (l_h[c] - l_h[n]));
            integral.set(c, integral[n] + l_h[n] * (z_tilde[c] - z_tilde[n]));
            raw.set(c, l_h[c] * z_tilde[c] - integral[c]);
        }
    }
    raw.set(tree.root(), l_h[tree.root()] * z_tilde[tree.root()]);
    (j, raw)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QstarGkw {
    pub eta_h: Strategy,
    pub n_h: AdaptedProcess,
    pub j_h: AdaptedProcess,
    pub j_h_raw: AdaptedProcess,
    pub eta_j: Strategy,
    pub n_j: AdaptedProcess,
    /// `E_Q*[dL^H dZ~* dS | n] = 0` at every node.
    pub predicate: bool,
    /// Relative size of the predicate's worst conditional moment.
    pub predicate_defect: f64,
    /// `eta^J . dS` vanishes on every edge.
    pub eta_j_vanishes: bool,
    pub eta_j_defect: f64,
}

/// Worst `|E_mu[dL dZ dS^i | n]|` over nodes and assets, relative to
/// `max|L| max|dZ| max|dS|`.
pub fn predicate_defect(tree: &EventTree, l: &AdaptedProcess, z: &AdaptedProcess, q: &EdgeMeasure, scale_l: f64) -> f64 {
    let mut dev = Deviation::default();
    let mut dz_max: f64 = 0.0;
    let mut ds_max: f64 = 0.0;
    for &n in tree.non_terminals() {
        for i in 0..tree.assets() {
            let m: f64 = tree
                .children(n)
                .iter()
                .map(|&c| q.weight(c) * (l[c] - l[n]) * (z[c] - z[n]) * tree.increment(c)[i])
                .sum();
            dev.add(m, 0.0);
        }
        for &c in tree.children(n) {
            dz_max = dz_max.max((z[c] - z[n]).abs());
            ds_max = ds_max.max(max_abs(&tree.increment(c)));
        }
    }
    dev.add(0.0, scale_l * dz_max * ds_max);
    crate::check::relative(dev.residual, dev.scale)
}

/// Worst `|E_mu[dL dS^i | n]|` relative to `max|L| max|dS|`; zero exactly
/// when the bracket `[L, S]` is a `mu`-martingale.
pub fn bracket_defect(tree: &EventTree, l: &AdaptedProcess, q: &EdgeMeasure, scale_l: f64) -> f64 {
    let mut dev = Deviation::default();
    for &n in tree.non_terminals() {
        for i in 0..tree.assets() {
            let m: f64 = tree.children(n).iter().map(|&c| q.weight(c) * (l[c] - l[n]) * tree.increment(c)[i]).sum();
            dev.add(m, 0.0);
        }
        for &c in tree.children(n) {
            dev.add(0.0, scale_l * max_abs(&tree.increment(c)));
        }
    }
    crate::check::relative(dev.residual, dev.scale)
}

/// Largest `|eta(n) . dS_c|` over edges.
fn increment_size(tree: &EventTree, eta: &Strategy) -> f64 {
    let mut worst: f64 = 0.0;
    for &n in tree.non_terminals() {
        for &c in tree.children(n) {
            let x: f64 = eta.at(n).iter().zip(tree.increment(c)).map(|(a, b)| a * b).sum();
            worst = worst.max(x.abs());
        }
    }
    worst
}

pub fn gkw_under_qstar(
    tree: &EventTree,
    bundle: &VsmmBundle,
    dec: &VsmmDecomposition,
    gkw: &GkwPtilde,
    tol: &Tolerances,
) -> Result<QstarGkw> {
    let q = qstar_measure(tree, bundle)?;
    let (eta_h, n_h) = gkw_qstar(tree, &dec.v_h, &q)?;
    let (j_h, j_h_raw) = compute_j(tree, &gkw.l_h, &bundle.z_tilde);
    let (eta_j, n_j) = gkw_qstar(tree, &j_h, &q)?;
    let scale_l = gkw.m.max_abs();
    let pd = predicate_defect(tree, &gkw.l_h, &bundle.z_tilde, &q, scale_l);
    let ej = crate::check::relative(increment_size(tree, &eta_j), bundle.z_tilde.max_abs() * scale_l);
    Ok(QstarGkw {
        eta_h,
        n_h,
        j_h,
        j_h_raw,
        eta_j,
        n_j,
        predicate: pd <= tol.identity,
        predicate_defect: pd,
        eta_j_vanishes: ej <= tol.identity,
        eta_j_defect: ej,
    })
}

/// The strategy prescribed by the feedback rule at every node, given the
/// running gains `g` of the hedge.
pub fn feedback_strategy(
    tree: &EventTree,
    bundle: &VsmmBundle,
    v_h: &AdaptedProcess,
    eta_h: &Strategy,
    eta_j: Option<&Strategy>,
    g: &AdaptedProcess,
) -> Strategy {
    Strategy::from_fn(tree, tree.assets(), |n| {
        let shortfall = (v_h[n] - g[n]) / bundle.z_tilde[n];
        (0..tree.assets())
            .map(|i| {
                let ej = eta_j.map_or(0.0, |e| e.at(n)[i]);
                eta_h.at(n)[i] - ej - bundle.theta_star.at(n)[i] * shortfall
            })
            .collect()
    })
}

/// Runs the feedback rule forward from zero wealth, choosing each holding
/// from the wealth accumulated so far.
pub fn simulate_feedback(
    tree: &EventTree,
    bundle: &VsmmBundle,
    v_h: &AdaptedProcess,
    eta_h: &Strategy,
    eta_j: Option<&Strategy>,
) -> (Strategy, AdaptedProcess) {
    let mut theta = Strategy::zeros(tree, tree.assets());
    let mut g = AdaptedProcess::zeros(tree);
    for &n in tree.non_terminals() {
        let shortfall = (v_h[n] - g[n]) / bundle.z_tilde[n];
        let row: Vec<f64> = (0..tree.assets())
            .map(|i| {
                let ej = eta_j.map_or(0.0, |e| e.at(n)[i]);
                eta_h.at(n)[i] - ej - bundle.theta_star.at(n)[i] * shortfall
            })
            .collect();
        for &c in tree.children(n) {
            let step: f64 = row.iter().zip(tree.increment(c)).map(|(a, b)| a * b).sum();
            g.set(c, g[n] + step);
        }
        theta.set(n, &row);
    }
    (theta, g)
}

/// Worst edge-wise gap `|(a(n) - b(n)) . dS_c|`.
fn increment_gap(tree: &EventTree, a: &Strategy, b: &Strategy) -> f64 {
    increment_size(tree, &a.combine(1.0, b, -1.0))
}

#[allow(clippy::too_many_arguments)]
pub fn verify_vsmm_decomposition(
    tree: &EventTree,
    basis: &GainsBasis,
    claim: &Claim,
    bundle: &VsmmBundle,
    dec: &VsmmDecomposition,
    tol: &Tolerances,
    rng: &mut impl Rng,
) -> Vec<Verdict> {
    let mut out = Vec::new();
    let p = EdgeMeasure::physical(tree);
    let h = claim.payoff();
    let scale = dec.v_h.max_abs().max(max_abs(h));

    let mut term = Deviation::default();
    for (s, &n) in tree.terminals().iter().enumerate() {
        term.add(dec.v_h[n] - h[s], scale);
    }
    term.add(dec.v0 - inner(tree, h, &bundle.g_star.g), scale);
    out.push(term.verdict("v_terminal_value", tol.identity));

    let vz = dec.v_h.zip_with(&bundle.z_star, |a, b| a * b);
    out.push(Verdict::relative(
        "v_times_density_martingale",
        martingale_defect(tree, &vz, &p),
        vz.max_abs(),
        tol.identity,
    ));

    let g_phi = gains(tree, &dec.phi_h);
    let mut split = Deviation::default();
    for n in 0..tree.len() {
        split.add(dec.v_h[n] - dec.v0 - g_phi[n] - dec.k_h[n], scale);
    }
    out.push(split.verdict("v_decomposition", tol.identity));

    let mut double = Deviation::default();
    for n in 0..tree.len() {
        double.add(dec.k_h[n] - dec.k_h_from_l[n], scale);
    }
    out.push(double.verdict("k_double_construction", tol.identity));

    let k_t = dec.k_h.terminal(tree);
    let mut orth = Deviation::default();
    orth.add(crate::process::expectation(tree, &k_t), scale);
    for j in 0..basis.len() {
        let col = basis.column(j);
        orth.add(inner(tree, &k_t, &col), scale * inner(tree, &col, &col).sqrt());
    }
    out.push(orth.verdict("k_orthogonal_to_gains_and_constants", tol.identity));

    let kz = dec.k_h.zip_with(&bundle.z_star, |a, b| a * b);
    out.push(Verdict::relative(
        "k_times_density_martingale",
        martingale_defect(tree, &kz, &p),
        scale * bundle.z_star.max_abs(),
        tol.identity,
    ));

    // direct construction: project H on span(gains) + R in one regression
    let n_term = tree.terminals().len();
    let design = Mat::from_fn(n_term, basis.len() + 1, |r, c| if c == 0 { 1.0 } else { basis.matrix()[(r, c - 1)] });
    let sol = weighted_min_norm_lstsq(&design, h, &tree.terminal_weights());
    let coeffs = &sol.x[1..];
    let phi_direct = basis.strategy(tree, coeffs);
    let g_direct = gains(tree, &phi_direct);
    let mut direct = Deviation::default();
    direct.add(sol.x[0] - dec.v0, scale);
    for n in 0..tree.len() {
        let k_direct = dec.v_h[n] - sol.x[0] - g_direct[n];
        direct.add(k_direct - dec.k_h[n], scale);
    }
    out.push(direct.verdict("v_decomposition_unique", tol.identity));

    let best = hedging_error(tree, claim, &dec.phi_h, dec.v0);
    let pscale = 0.1 * (1.0 + dec.phi_h.max_abs());
    let mut beaten = 0;
    for _ in 0..50 {
        let delta = random_strategy(tree, tree.assets(), pscale, rng);
        let dx = pscale * rng.random_range(-1.0..1.0);
        let trial = hedging_error(tree, claim, &dec.phi_h.combine(1.0, &delta, 1.0), dec.v0 + dx);
        if trial < best - tol.identity * inner(tree, h, h) {
            beaten += 1;
        }
    }
    out.push(Verdict::decided("initial_capital_hedge_optimal", beaten == 0, beaten as f64, 0.0));

    out
}

#[allow(clippy::too_many_arguments)]
pub fn verify_qstar(
    tree: &EventTree,
    claim: &Claim,
    bundle: &VsmmBundle,
    hedge: &HedgeDecomposition,
    gkw: &GkwPtilde,
    dec: &VsmmDecomposition,
    qg: &QstarGkw,
    tol: &Tolerances,
) -> Vec<Verdict> {
    let mut out = Vec::new();
    let q = match qstar_measure(tree, bundle) {
        Ok(q) => q,
        Err(_) => return out,
    };
    let prices = VectorProcess::prices(tree);
    let scale = dec.v_h.max_abs().max(max_abs(claim.payoff()));
    let scale_l = gkw.m.max_abs();
    let zmax = bundle.z_tilde.max_abs();
    let s_max = (0..tree.len()).map(|n| max_abs(tree.price(n))).fold(0.0, f64::max);

    // V = V0 + eta^H . S + N^H, with N^H and N^H S Q*-martingales
    let g_eta = gains(tree, &qg.eta_h);
    let mut rep = Deviation::default();
    for n in 0..tree.len() {
        rep.add(dec.v_h[n] - dec.v0 - g_eta[n] - qg.n_h[n], scale);
    }
    out.push(rep.verdict("qstar_gkw_of_v", tol.identity));
    let mut nmart = Deviation::default();
    for (nproc, sc) in [(&qg.n_h, scale), (&qg.n_j, zmax * scale_l)] {
        nmart.add(martingale_defect(tree, nproc, &q), sc);
        for i in 0..tree.assets() {
            let ns = AdaptedProcess::new((0..tree.len()).map(|n| nproc[n] * prices.at(n)[i]).collect());
            nmart.add(martingale_defect(tree, &ns, &q), sc * s_max);
        }
    }
    out.push(nmart.verdict("qstar_gkw_residuals_orthogonal", tol.identity));

    // J in both forms, a Q*-martingale starting at zero
    let mut j = Deviation::default();
    for n in 0..tree.len() {
        j.add(qg.j_h[n] - qg.j_h_raw[n], zmax * scale_l);
    }
    j.add(qg.j_h[tree.root()], zmax * scale_l);
    j.add(martingale_defect(tree, &qg.j_h, &q), zmax * scale_l);
    out.push(j.verdict("j_forms_agree_and_martingale", tol.identity));

    // V = V0 + (theta^H + (alpha^H + L_-) theta*) . S + J
    let integrand = Strategy::from_fn(tree, tree.assets(), |n| {
        let a = hedge.alpha_h + gkw.l_h[n];
        hedge.theta_h.at(n).iter().zip(bundle.theta_star.at(n)).map(|(t, s)| t + a * s).collect()
    });
    let g_int = gains(tree, &integrand);
    let mut vj = Deviation::default();
    for n in 0..tree.len() {
        vj.add(dec.v_h[n] - dec.v0 - g_int[n] - qg.j_h[n], scale);
    }
    out.push(vj.verdict("v_representation_with_j", tol.identity));

    let mut nn = Deviation::default();
    for n in 0..tree.len() {
        nn.add(qg.n_h[n] - qg.n_j[n], scale);
    }
    out.push(nn.verdict("gkw_residuals_coincide", tol.identity));

    let eta_rel = integrand.combine(1.0, &qg.eta_j, 1.0);
    out.push(Verdict::relative(
        "eta_relation",
        increment_gap(tree, &qg.eta_h, &eta_rel),
        scale,
        tol.identity,
    ));

    let g_h = gains(tree, &hedge.theta_h);
    let mut shortfall = Deviation::default();
    for n in 0..tree.len() {
        shortfall.add(bundle.z_tilde[n] * (hedge.alpha_h + gkw.l_h[n]) - (dec.v_h[n] - g_h[n]), scale);
    }
    out.push(shortfall.verdict("shortfall_identity", tol.identity));

    let fb = feedback_strategy(tree, bundle, &dec.v_h, &qg.eta_h, Some(&qg.eta_j), &g_h);
    out.push(Verdict::relative(
        "feedback_equation",
        increment_gap(tree, &fb, &hedge.theta_h),
        scale,
        tol.identity,
    ));
    let (_, g_sim) = simulate_feedback(tree, bundle, &dec.v_h, &qg.eta_h, Some(&qg.eta_j));
    let mut closure = Deviation::default();
    for n in 0..tree.len() {
        closure.add(g_sim[n] - g_h[n], scale);
    }
    out.push(closure.verdict("feedback_forward_closure", tol.identity));

    out.push(Verdict::decided(
        "predicate_iff_eta_j_vanishes",
        qg.predicate == qg.eta_j_vanishes,
        qg.predicate_defect.min(qg.eta_j_defect),
        tol.identity,
    ));
    if qg.predicate {
        let simple = feedback_strategy(tree, bundle, &dec.v_h, &qg.eta_h, None, &g_h);
        out.push(Verdict::relative(
            "simplified_feedback",
            increment_gap(tree, &simple, &hedge.theta_h),
            scale,
            tol.identity,
        ));
    }

    out.push(Verdict::relative(
        "bracket_l_s_qstar_martingale",
        bracket_defect(tree, &gkw.l_h, &q, scale_l),
        1.0,
        tol.strict(),
    ));
    out
}
