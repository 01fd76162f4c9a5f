//! The variance-optimal signed martingale measure.
//!
//! `g*` is the element of minimal `L^2(P)` norm among all signed martingale
//! densities. It is obtained by projecting the constant `1` onto the
//! orthogonal complement of the gains span and normalizing; it then lies in
//! `span(gains) + R`, which yields the strategy `theta*` with
//! `g* = E[(g*)^2] + G_T(theta*)` and the process
//! `Z~*_t = E[(g*)^2] + G_t(theta*)`.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::check::{martingale_defect, max_abs, Deviation, Tolerances, Verdict};
use crate::error::{MvhError, Result};
use crate::linalg::{column_space_complement, mat_vec, min_norm_lstsq, rank, Mat};
use crate::process::{conditional_expectation, expectation, gains, inner, AdaptedProcess, EdgeMeasure, Strategy};
use crate::projection::{project_l2, GainsBasis};
use crate::tree::EventTree;

/// An equivalent martingale measure must keep every one-step weight above
/// this margin.
pub const FEASIBILITY_MARGIN: f64 = 1e-10;

/// Relative threshold below which a density value counts as zero.
pub const ZERO_DENSITY_TOL: f64 = 1e-12;

/// Outcome of the equivalent-martingale-measure feasibility test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoArbitrage {
    pub feasible: bool,
    /// Smallest one-step martingale weight achievable, minimized over
    /// nodes; `None` when some node admits no martingale weights at all.
    pub margin: Option<f64>,
    /// Node with the smallest margin.
    pub worst_node: Option<String>,
    /// One-step weights of a martingale measure maximizing the margin.
    pub witness: Option<EdgeMeasure>,
}

/// Solves, at each non-terminal node, the linear program
/// `max eps` s.t. `q_c >= eps`, `sum q_c = 1`, `sum q_c dS_c = 0`.
pub fn check_me_nonempty(tree: &EventTree) -> NoArbitrage {
    let mut witness = vec![1.0; tree.len()];
    let mut margin = f64::INFINITY;
    let mut worst = None;
    let mut infeasible = false;
    for &n in tree.non_terminals() {
        match node_margin(tree, n) {
            Some((eps, q)) => {
                if eps < margin {
                    margin = eps;
                    worst = Some(tree.id(n).to_string());
                }
                for (&c, w) in tree.children(n).iter().zip(q) {
                    witness[c] = w;
                }
            }
            None => {
                if !infeasible {
                    worst = Some(tree.id(n).to_string());
                }
                infeasible = true;
            }
        }
    }
    if infeasible {
        return NoArbitrage { feasible: false, margin: None, worst_node: worst, witness: None };
    }
    let feasible = margin > FEASIBILITY_MARGIN;
    NoArbitrage {
        feasible,
        margin: Some(margin),
        worst_node: worst,
        witness: feasible.then(|| EdgeMeasure::new(witness)),
    }
}

fn node_margin(tree: &EventTree, n: usize) -> Option<(f64, Vec<f64>)> {
    let children = tree.children(n);
    let k = children.len();
    // increments, each asset rescaled to unit max so the LP is well scaled
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for i in 0..tree.assets() {
        let inc: Vec<f64> = children.iter().map(|&c| tree.price(c)[i] - tree.price(n)[i]).collect();
        let scale = max_abs(&inc);
        if scale > 0.0 {
            rows.push(inc.iter().map(|x| x / scale).collect());
        }
    }

    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let q: Vec<_> = (0..k).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    let eps = lp.add_var(1.0, (-1.0, 1.0));
    for &v in &q {
        lp.add_constraint([(v, 1.0), (eps, -1.0)], ComparisonOp::Ge, 0.0);
    }
    let ones: Vec<_> = q.iter().map(|&v| (v, 1.0)).collect();
    lp.add_constraint(ones.as_slice(), ComparisonOp::Eq, 1.0);
    for row in &rows {
        let expr: Vec<_> = q.iter().zip(row).map(|(&v, &x)| (v, x)).collect();
        lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, 0.0);
    }
    let sol = lp.solve().ok()?;
    let mut weights: Vec<f64> = q.iter().map(|&v| sol[v]).collect();

    // polish onto the equality constraints with a minimum-norm correction
    let mut cons = vec![vec![1.0; k]];
    cons.extend(rows.iter().cloned());
    let a = Mat::from_fn(cons.len(), k, |r, c| cons[r][c]);
    let mut gap: Vec<f64> = mat_vec(&a, &weights).iter().map(|x| -x).collect();
    gap[0] += 1.0;
    let delta = min_norm_lstsq(&a, &gap).x;
    let polished: Vec<f64> = weights.iter().zip(&delta).map(|(w, d)| w + d).collect();
    if polished.iter().all(|&w| w > 0.0) {
        weights = polished;
    }
    let margin = weights.iter().copied().fold(f64::INFINITY, f64::min).min(sol[eps]);
    Some((margin, weights))
}

/// A terminal signed density with its positivity flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityElement {
    pub g: Vec<f64>,
    pub is_strictly_positive: bool,
    pub is_nonzero: bool,
}

impl DensityElement {
    pub fn new(g: Vec<f64>) -> Self {
        let zero = ZERO_DENSITY_TOL * max_abs(&g);
        let is_nonzero = g.iter().all(|x| x.abs() > zero);
        let is_strictly_positive = is_nonzero && g.iter().all(|&x| x > 0.0);
        DensityElement { g, is_strictly_positive, is_nonzero }
    }

    pub fn second_moment(&self, tree: &EventTree) -> f64 {
        inner(tree, &self.g, &self.g)
    }

    /// `Z^g_t = E[g | F_t]` under the reference probability.
    pub fn density_process(&self, tree: &EventTree) -> AdaptedProcess {
        conditional_expectation(tree, &self.g, &EdgeMeasure::physical(tree))
    }

    /// `(|E[g] - 1|, max_j |E[g a_j]| / (|g|_2 |a_j|_2))` over the basis columns.
    pub fn constraint_defect(&self, tree: &EventTree, basis: &GainsBasis) -> (f64, f64) {
        let mean = (expectation(tree, &self.g) - 1.0).abs();
        let norm = self.second_moment(tree).sqrt();
        let mut worst: f64 = 0.0;
        for k in 0..basis.len() {
            let col = basis.column(k);
            let cn = inner(tree, &col, &col).sqrt();
            if cn > 0.0 {
                worst = worst.max(inner(tree, &self.g, &col).abs() / (norm * cn));
            }
        }
        (mean, worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisFlags {
    /// An equivalent martingale measure exists.
    pub h2: bool,
    /// `g*` is nowhere zero.
    pub h3: bool,
    /// `g*` is strictly positive, i.e. the VSMM is itself equivalent.
    pub qstar_equivalent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VsmmBundle {
    pub g_star: DensityElement,
    /// `E[(g*)^2]` computed directly.
    pub e_gstar_sq: f64,
    /// `1 / E[pi(1)]`, which must equal `E[(g*)^2]`.
    pub e_gstar_sq_projection: f64,
    pub theta_star: Strategy,
    /// `max |g* - E[(g*)^2] - G_T(theta*)|` left by the projection.
    pub theta_star_residual: f64,
    pub z_star: AdaptedProcess,
    pub z_tilde: AdaptedProcess,
    pub flags: HypothesisFlags,
}

/// `g* = pi(1) / E[pi(1)]` with `pi` the projection onto the orthogonal
/// complement of the gains span. Refuses when no equivalent martingale
/// measure exists.
pub fn compute_gstar(tree: &EventTree, basis: &GainsBasis, no_arb: &NoArbitrage) -> Result<(DensityElement, f64)> {
    if !no_arb.feasible {
        let at = no_arb.worst_node.as_deref().unwrap_or("?");
        let why = match no_arb.margin {
            None => format!("no one-step martingale weights exist at node {at}"),
            Some(m) => format!("largest one-step margin {m:e} at node {at} is not positive"),
        };
        return Err(MvhError::NoEquivalentMartingaleMeasure(why));
    }
    let ones = vec![1.0; tree.terminals().len()];
    let pi1 = project_l2(tree, &ones, basis).residual;
    let mean = expectation(tree, &pi1);
    if mean <= f64::EPSILON {
        return Err(MvhError::NoEquivalentMartingaleMeasure(
            "the constant 1 lies in the gains span".into(),
        ));
    }
    let g = pi1.iter().map(|x| x / mean).collect();
    Ok((DensityElement::new(g), 1.0 / mean))
}

/// `theta*` from projecting `g* - E[(g*)^2]` onto the gains span; also
/// returns the worst terminal residual.
pub fn compute_theta_star(tree: &EventTree, basis: &GainsBasis, g_star: &DensityElement, e_sq: f64) -> (Strategy, f64) {
    let target: Vec<f64> = g_star.g.iter().map(|g| g - e_sq).collect();
    let proj = project_l2(tree, &target, basis);
    (basis.strategy(tree, &proj.coefficients), max_abs(&proj.residual))
}

/// `Z*_t = E[g* | F_t]` and `Z~*_t = E[(g*)^2] + G_t(theta*)`.
pub fn density_processes(
    tree: &EventTree,
    g_star: &DensityElement,
    theta_star: &Strategy,
    e_sq: f64,
) -> (AdaptedProcess, AdaptedProcess) {
    let z_star = g_star.density_process(tree);
    let z_tilde = gains(tree, theta_star).map(|x| e_sq + x);
    (z_star, z_tilde)
}

pub fn compute_vsmm(tree: &EventTree, basis: &GainsBasis, no_arb: &NoArbitrage) -> Result<VsmmBundle> {
    let (g_star, e_sq_proj) = compute_gstar(tree, basis, no_arb)?;
    let e_sq = g_star.second_moment(tree);
    let (theta_star, residual) = compute_theta_star(tree, basis, &g_star, e_sq);
    let (z_star, z_tilde) = density_processes(tree, &g_star, &theta_star, e_sq);
    let flags = HypothesisFlags {
        h2: no_arb.feasible,
        h3: g_star.is_nonzero,
        qstar_equivalent: g_star.is_strictly_positive,
    };
    Ok(VsmmBundle {
        g_star,
        e_gstar_sq: e_sq,
        e_gstar_sq_projection: e_sq_proj,
        theta_star,
        theta_star_residual: residual,
        z_star,
        z_tilde,
        flags,
    })
}

/// Signed-root product `Z~* Z*` and the nodes where it has hit zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Absorption {
    pub product: AdaptedProcess,
    /// Nodes where the product vanishes (relative to its largest value)
    /// while it was non-zero at the parent.
    pub hitting_nodes: Vec<usize>,
}

pub fn absorption(tree: &EventTree, bundle: &VsmmBundle) -> Absorption {
    let product = bundle.z_tilde.zip_with(&bundle.z_star, |a, b| a * b);
    let zero = ZERO_DENSITY_TOL * product.max_abs();
    let is_zero = |n: usize| product[n].abs() <= zero;
    let hitting_nodes = (0..tree.len())
        .filter(|&n| is_zero(n) && tree.parent(n).is_none_or(|p| !is_zero(p)))
        .collect();
    Absorption { product, hitting_nodes }
}

/// Orthonormal (under `P`) basis of the orthogonal complement of
/// `span(gains) + R`; every signed martingale density is `g*` plus a
/// combination of these.
pub fn ds_basis(tree: &EventTree, basis: &GainsBasis) -> Vec<Vec<f64>> {
    let sw: Vec<f64> = tree.terminal_weights().iter().map(|w| w.sqrt()).collect();
    let b = Mat::from_fn(sw.len(), basis.len() + 1, |r, c| {
        sw[r] * if c == 0 { 1.0 } else { basis.matrix()[(r, c - 1)] }
    });
    column_space_complement(&b)
        .into_iter()
        .map(|u| {
            // fix the sign so the entry of largest magnitude is positive
            let pivot = (0..u.len()).max_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs())).unwrap_or(0);
            let sign = if u[pivot] < 0.0 { -1.0 } else { 1.0 };
            u.iter().zip(&sw).map(|(x, s)| sign * x / s).collect()
        })
        .collect()
}

/// Rank of `span(gains) + R`. All path weights are positive, so this is the
/// rank of the unweighted design `[1 | gains]`.
pub fn span_with_constants_rank(tree: &EventTree, basis: &GainsBasis) -> usize {
    let n = tree.terminals().len();
    let design = Mat::from_fn(n, basis.len() + 1, |r, c| if c == 0 { 1.0 } else { basis.matrix()[(r, c - 1)] });
    rank(&design)
}

/// Checks of the VSMM objects; `ds` may be empty when the complement basis
/// was not computed.
pub fn verify_vsmm(
    tree: &EventTree,
    basis: &GainsBasis,
    no_arb: &NoArbitrage,
    bundle: &VsmmBundle,
    ds: Option<&[Vec<f64>]>,
    tol: &Tolerances,
    rng: &mut impl Rng,
) -> Vec<Verdict> {
    let mut out = Vec::new();
    let p = EdgeMeasure::physical(tree);
    let g = &bundle.g_star.g;
    let gmax = max_abs(g);

    if let Some(w) = &no_arb.witness {
        let mut dev = Deviation::default();
        for &n in tree.non_terminals() {
            let mut sum = 0.0;
            let mut drift = vec![0.0; tree.assets()];
            for &c in tree.children(n) {
                sum += w.weight(c);
                for (i, x) in tree.increment(c).into_iter().enumerate() {
                    drift[i] += w.weight(c) * x;
                    dev.add(0.0, x);
                }
            }
            dev.add(sum - 1.0, 1.0);
            dev.add(max_abs(&drift), 0.0);
        }
        out.push(dev.verdict("witness_is_martingale_measure", tol.identity));
    }

    let (mean_defect, orth_defect) = bundle.g_star.constraint_defect(tree, basis);
    out.push(Verdict::relative("gstar_density_constraints", mean_defect.max(orth_defect), 1.0, tol.strict()));
    out.push(Verdict::relative(
        "gstar_second_moment_consistency",
        bundle.e_gstar_sq - bundle.e_gstar_sq_projection,
        bundle.e_gstar_sq,
        tol.identity,
    ));

    let gt = gains(tree, &bundle.theta_star).terminal(tree);
    let mut affine = Deviation::default();
    for (gs, gain) in g.iter().zip(&gt) {
        affine.add(gs - bundle.e_gstar_sq - gain, gmax);
    }
    out.push(affine.verdict("gstar_affine_in_gains", tol.identity));

    let mut ends = Deviation::default();
    ends.add(bundle.z_star[tree.root()] - 1.0, 1.0);
    ends.add(bundle.z_tilde[tree.root()] - bundle.e_gstar_sq, bundle.e_gstar_sq);
    for (s, &n) in tree.terminals().iter().enumerate() {
        ends.add(bundle.z_tilde[n] - g[s], gmax);
        ends.add(bundle.z_star[n] - g[s], gmax);
    }
    out.push(ends.verdict("density_process_endpoints", tol.identity));

    if let Some(w) = &no_arb.witness {
        let via_q = conditional_expectation(tree, g, w);
        let mut dev = Deviation::default();
        for n in 0..tree.len() {
            dev.add(via_q[n] - bundle.z_tilde[n], bundle.z_tilde.max_abs());
        }
        out.push(dev.verdict("z_tilde_measure_independent", tol.identity));
    }

    // Z~* Z^g is a P-martingale for g* and for g* + h
    let mut densities = vec![g.clone()];
    if let Some(ds) = ds {
        densities.extend(ds.iter().map(|h| g.iter().zip(h).map(|(a, b)| a + b).collect()));
    }
    let mut mart = Deviation::default();
    for dens in &densities {
        let zg = conditional_expectation(tree, dens, &p);
        let prod = bundle.z_tilde.zip_with(&zg, |a, b| a * b);
        mart.add(martingale_defect(tree, &prod, &p), bundle.z_tilde.max_abs() * zg.max_abs());
    }
    out.push(mart.verdict("z_tilde_times_density_martingale", tol.identity));

    let abs = absorption(tree, bundle);
    let scale = abs.product.max_abs();
    let min = abs.product.values().iter().copied().fold(f64::INFINITY, f64::min);
    out.push(Verdict::relative("zz_nonnegative", min.min(0.0), scale, tol.identity));
    let mut absorbed = Deviation::default();
    for &n in &abs.hitting_nodes {
        for m in tree.subtree(n) {
            absorbed.add(abs.product[m], scale);
        }
    }
    absorbed.add(0.0, scale);
    out.push(absorbed.verdict("zz_absorbed_after_hitting_zero", tol.identity));
    let positive = !bundle.flags.h3 || min > ZERO_DENSITY_TOL * scale;
    out.push(Verdict::decided(
        "zz_positive_when_density_nonzero",
        positive,
        if positive { 0.0 } else { min.abs() / scale.max(f64::MIN_POSITIVE) },
        tol.identity,
    ));

    if let Some(ds) = ds {
        let (mut worst_norm, mut worst_cons) = (0.0f64, 0.0f64);
        let base = bundle.g_star.second_moment(tree).sqrt();
        if !ds.is_empty() {
            for _ in 0..50 {
                let mut cand = g.clone();
                for h in ds {
                    let c: f64 = rng.random_range(-1.0..1.0);
                    for (x, y) in cand.iter_mut().zip(h) {
                        *x += c * y;
                    }
                }
                let el = DensityElement::new(cand);
                let (m, o) = el.constraint_defect(tree, basis);
                worst_cons = worst_cons.max(m.max(o));
                worst_norm = worst_norm.max(base - el.second_moment(tree).sqrt());
            }
        }
        out.push(Verdict::decided(
            "gstar_minimal_norm",
            worst_norm <= 1e-9 && worst_cons <= tol.identity,
            worst_norm.max(0.0).max(worst_cons),
            tol.identity,
        ));
        let expected = tree.terminals().len() - span_with_constants_rank(tree, basis);
        out.push(Verdict::decided(
            "ds_basis_dimension",
            ds.len() == expected,
            (ds.len() as f64 - expected as f64).abs(),
            0.0,
        ));
    }
    out
}
