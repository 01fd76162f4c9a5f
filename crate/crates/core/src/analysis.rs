//! Runs the full pipeline for one claim and collects every verification
//! verdict.
//!
//! Sections that need a hypothesis the model fails are recorded as
//! unavailable with the reason, never approximated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::check::{max_abs, Deviation, Tolerances, Verdict};
use crate::error::MvhError;
use crate::hedge::{solve_mvh, verify_hedge, HedgeDecomposition};
use crate::numeraire::{build_frame, gkw_ptilde, verify_numeraire, GkwPtilde, NumeraireFrame};
use crate::oracle::{oracle_full_solve, ORACLE_MAX_TERMINALS};
use crate::process::{gains, inner, Claim};
use crate::projection::gains_basis;
use crate::qstar::{decompose_v, gkw_under_qstar, verify_qstar, verify_vsmm_decomposition, QstarGkw, VsmmDecomposition};
use crate::tree::EventTree;
use crate::vsmm::{check_me_nonempty, compute_vsmm, ds_basis, verify_vsmm, NoArbitrage, VsmmBundle};

/// Largest tree for which the complement basis (a dense eigenproblem in the
/// number of terminal states) is built during verification.
pub const DS_MAX_TERMINALS: usize = 512;

/// Fixed seed of the random draws used by verification, so verdicts are
/// reproducible.
const VERIFY_SEED: u64 = 0x6d76_685f_7665_7269;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumeraireSection {
    pub frame: NumeraireFrame,
    pub gkw: GkwPtilde,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unavailable {
    pub section: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub no_arbitrage: NoArbitrage,
    pub vsmm: Option<VsmmBundle>,
    pub hedge: Option<HedgeDecomposition>,
    pub numeraire: Option<NumeraireSection>,
    pub vsmm_decomposition: Option<VsmmDecomposition>,
    pub qstar: Option<QstarGkw>,
    pub unavailable: Vec<Unavailable>,
}

impl Analysis {
    /// Why the pipeline stopped short of the numeraire change, if it did:
    /// a missing equivalent martingale measure or a vanishing `g*`.
    pub fn refusal(&self) -> Option<String> {
        self.unavailable
            .iter()
            .find(|u| u.section == "vsmm" || u.section == "numeraire")
            .map(|u| u.reason.clone())
    }

    fn mark(&mut self, section: &str, err: &MvhError) {
        self.unavailable.push(Unavailable { section: section.into(), reason: err.to_string() });
    }
}

pub fn analyze(tree: &EventTree, claim: &Claim, tol: &Tolerances) -> Analysis {
    let basis = gains_basis(tree);
    let no_arbitrage = check_me_nonempty(tree);
    let mut a = Analysis {
        no_arbitrage,
        vsmm: None,
        hedge: None,
        numeraire: None,
        vsmm_decomposition: None,
        qstar: None,
        unavailable: Vec::new(),
    };
    let bundle = match compute_vsmm(tree, &basis, &a.no_arbitrage) {
        Ok(b) => b,
        Err(e) => {
            a.mark("vsmm", &e);
            return a;
        }
    };
    let hedge = solve_mvh(tree, &basis, claim, &bundle);
    let section = build_frame(tree, &bundle).and_then(|frame| {
        let gkw = gkw_ptilde(tree, claim, &frame, &bundle)?;
        Ok(NumeraireSection { frame, gkw })
    });
    match section {
        Ok(sec) => {
            match decompose_v(tree, claim, &bundle, &hedge, &sec.gkw) {
                Ok(dec) => {
                    match gkw_under_qstar(tree, &bundle, &dec, &sec.gkw, tol) {
                        Ok(q) => a.qstar = Some(q),
                        Err(e) => a.mark("qstar", &e),
                    }
                    a.vsmm_decomposition = Some(dec);
                }
                Err(e) => a.mark("vsmm_decomposition", &e),
            }
            a.numeraire = Some(sec);
        }
        Err(e) => a.mark("numeraire", &e),
    }
    a.vsmm = Some(bundle);
    a.hedge = Some(hedge);
    a
}

/// Every applicable verdict for an analysis, including agreement with the
/// independent oracle when the tree is small enough.
pub fn verify(tree: &EventTree, claim: &Claim, a: &Analysis, tol: &Tolerances) -> Vec<Verdict> {
    let mut out = Vec::new();
    let basis = gains_basis(tree);
    let ds = (tree.terminals().len() <= DS_MAX_TERMINALS).then(|| ds_basis(tree, &basis));
    let ds = ds.as_deref();
    let rng = |k: u64| ChaCha8Rng::seed_from_u64(VERIFY_SEED.wrapping_add(k));

    let (Some(bundle), Some(hedge)) = (&a.vsmm, &a.hedge) else {
        return out;
    };
    out.extend(verify_vsmm(tree, &basis, &a.no_arbitrage, bundle, ds, tol, &mut rng(1)));
    out.extend(verify_hedge(tree, &basis, claim, bundle, hedge, ds, tol, &mut rng(2)));
    if let Some(sec) = &a.numeraire {
        out.extend(verify_numeraire(tree, claim, bundle, &sec.frame, &sec.gkw, hedge, ds, tol, &mut rng(3)));
        if let Some(dec) = &a.vsmm_decomposition {
            out.extend(verify_vsmm_decomposition(tree, &basis, claim, bundle, dec, tol, &mut rng(4)));
            if let Some(qg) = &a.qstar {
                out.extend(verify_qstar(tree, claim, bundle, hedge, &sec.gkw, dec, qg, tol));
            }
        }
    }
    if tree.terminals().len() <= ORACLE_MAX_TERMINALS {
        out.extend(oracle_agreement(tree, claim, bundle, hedge, tol));
    }
    out
}

/// Agreement of `g*`, `theta^H`, `alpha^H` and the objective with
/// [`oracle_full_solve`].
pub fn oracle_agreement(
    tree: &EventTree,
    claim: &Claim,
    bundle: &VsmmBundle,
    hedge: &HedgeDecomposition,
    tol: &Tolerances,
) -> Vec<Verdict> {
    let Ok(o) = oracle_full_solve(tree, claim) else {
        return Vec::new();
    };
    let g = o.align(&o.g_star, tree.terminals());
    let h = claim.payoff();
    let h_norm = inner(tree, h, h).sqrt();
    let g_norm = bundle.e_gstar_sq.sqrt();

    let mut gs = Deviation::default();
    for (a, b) in g.iter().zip(&bundle.g_star.g) {
        gs.add(a - b, max_abs(&bundle.g_star.g));
    }
    gs.add(o.e_gstar_sq - bundle.e_gstar_sq, bundle.e_gstar_sq);

    let mut th = Deviation::default();
    for (&n, row) in &o.theta_h {
        for (a, b) in row.iter().zip(hedge.theta_h.at(n)) {
            th.add(a - b, hedge.theta_h.max_abs());
        }
    }
    // the gains of the two strategies, evaluated by the main recursion
    let mut theta_o = crate::process::Strategy::zeros(tree, tree.assets());
    for (&n, row) in &o.theta_h {
        theta_o.set(n, row);
    }
    let (ga, gb) = (gains(tree, &theta_o), gains(tree, &hedge.theta_h));
    for n in 0..tree.len() {
        th.add(ga[n] - gb[n], max_abs(h));
    }

    vec![
        gs.verdict("oracle_gstar", tol.oracle),
        th.verdict("oracle_theta_h", tol.oracle),
        Verdict::relative("oracle_alpha_h", o.alpha_h - hedge.alpha_h, h_norm / g_norm, tol.oracle),
        Verdict::relative("oracle_objective", o.objective - hedge.objective, h_norm * h_norm, tol.oracle),
    ]
}
