//! The JSON hedge report written by `mvh analyze`.
//!
//! A report carries a digest of the model it was computed from, the full
//! analysis (every per-node table), and the verdicts. Because the tables are
//! stored, [`reverify`] can re-run every check from the report plus the model
//! file without recomputing the pipeline.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{analyze, verify, Analysis};
use crate::check::{Tolerances, Verdict};
use crate::error::{MvhError, Result};
use crate::process::Claim;
use crate::tree::{EventTree, ModelFile};

pub const REPORT_SCHEMA: &str = "mvh-report/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDigest {
    /// Hex SHA-256 of the model in canonical form (pretty JSON of the parsed
    /// document, trailing newline).
    pub sha256: String,
    pub nodes: usize,
    pub terminals: usize,
    pub assets: usize,
    pub horizon: usize,
}

impl ModelDigest {
    pub fn of(model: &ModelFile, tree: &EventTree) -> Self {
        ModelDigest {
            sha256: hex::encode(Sha256::digest(model.to_json().as_bytes())),
            nodes: tree.len(),
            terminals: tree.terminals().len(),
            assets: tree.assets(),
            horizon: tree.horizon(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// Every applicable verdict passed.
    Ok,
    /// At least one verdict failed.
    Failed,
    /// The pipeline stopped: no equivalent martingale measure, or `g*`
    /// vanishes somewhere.
    Refused,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportFlags {
    /// An equivalent martingale measure exists.
    pub h2: bool,
    /// `g*` is non-zero in every terminal state.
    pub h3: bool,
    /// `g*` is strictly positive, so `Q*` is an equivalent measure.
    pub qstar_equivalent: bool,
    /// `E_Q*[dL dZ~ dS | F] = 0` at every node; `None` when the `Q*`
    /// decomposition is unavailable.
    pub predicate: Option<bool>,
    /// `eta^J` vanishes at every node; `None` when unavailable.
    pub eta_j_vanishes: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scalars {
    pub e_gstar_sq: Option<f64>,
    pub alpha_h: Option<f64>,
    pub v0: Option<f64>,
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeReport {
    pub schema: String,
    pub model: ModelDigest,
    pub claim: String,
    pub status: Status,
    pub reason: Option<String>,
    pub tolerances: Tolerances,
    pub flags: ReportFlags,
    pub scalars: Scalars,
    /// Node id per node index; every per-node table in `analysis` is indexed
    /// in this order.
    pub node_ids: Vec<String>,
    /// Terminal node ids, in the order of terminal-indexed vectors.
    pub terminal_ids: Vec<String>,
    pub analysis: Analysis,
    pub verdicts: Vec<Verdict>,
}

impl HedgeReport {
    pub fn build(model: &ModelFile, tree: &EventTree, claim: &Claim, tol: &Tolerances) -> Self {
        let analysis = analyze(tree, claim, tol);
        let verdicts = verify(tree, claim, &analysis, tol);
        let reason = analysis.refusal();
        let status = if reason.is_some() {
            Status::Refused
        } else if verdicts.iter().all(|v| v.passed) {
            Status::Ok
        } else {
            Status::Failed
        };
        let flags = ReportFlags {
            h2: analysis.no_arbitrage.feasible,
            h3: analysis.vsmm.as_ref().is_some_and(|b| b.flags.h3),
            qstar_equivalent: analysis.vsmm.as_ref().is_some_and(|b| b.flags.qstar_equivalent),
            predicate: analysis.qstar.as_ref().map(|q| q.predicate),
            eta_j_vanishes: analysis.qstar.as_ref().map(|q| q.eta_j_vanishes),
        };
        let scalars = Scalars {
            e_gstar_sq: analysis.vsmm.as_ref().map(|b| b.e_gstar_sq),
            alpha_h: analysis.hedge.as_ref().map(|h| h.alpha_h),
            v0: analysis.vsmm_decomposition.as_ref().map(|d| d.v0),
            objective: analysis.hedge.as_ref().map(|h| h.objective),
        };
        HedgeReport {
            schema: REPORT_SCHEMA.to_string(),
            model: ModelDigest::of(model, tree),
            claim: claim.label().to_string(),
            status,
            reason,
            tolerances: *tol,
            flags,
            scalars,
            node_ids: tree.ids(),
            terminal_ids: tree.terminal_ids(),
            analysis,
            verdicts,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut out = serde_json::to_string_pretty(self)?;
        out.push('\n');
        Ok(out)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Process exit code for `mvh analyze`: 0 ok, 1 failed, 4 refused.
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Ok => 0,
            Status::Failed => 1,
            Status::Refused => 4,
        }
    }
}

/// Looks up a claim by label.
pub fn find_claim(claims: &[Claim], label: &str) -> Result<Claim> {
    claims
        .iter()
        .find(|c| c.label() == label)
        .cloned()
        .ok_or_else(|| MvhError::UnknownClaim(label.to_string()))
}

/// Re-runs every check against the tables stored in `report`, using only the
/// report and the model it was computed from.
pub fn reverify(report: &HedgeReport, model: &ModelFile) -> Result<Vec<Verdict>> {
    let (tree, claims) = model.build()?;
    let digest = ModelDigest::of(model, &tree);
    if digest != report.model {
        return Err(MvhError::ReportMismatch(format!(
            "model digest {} differs from report digest {}",
            digest.sha256, report.model.sha256
        )));
    }
    if report.node_ids != tree.ids() {
        return Err(MvhError::ReportMismatch("node order differs".into()));
    }
    let claim = find_claim(&claims, &report.claim)?;
    Ok(verify(&tree, &claim, &report.analysis, &report.tolerances))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::builtin_fixture;

    fn model_for(name: &str) -> (ModelFile, EventTree, Claim) {
        let (tree, claim) = builtin_fixture(name).unwrap();
        let model = tree.to_model(std::slice::from_ref(&claim));
        (model, tree, claim)
    }

    #[test]
    fn fixture_a_report_is_ok_and_round_trips() {
        let (model, tree, claim) = model_for("A");
        let r = HedgeReport::build(&model, &tree, &claim, &Tolerances::default());
        assert_eq!(r.status, Status::Ok);
        assert_eq!(r.flags.predicate, Some(true));
        let back = HedgeReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(reverify(&back, &model).unwrap(), r.verdicts);
    }

    #[test]
    fn fixture_b_reports_signed_vsmm_without_refusing() {
        let (model, tree, claim) = model_for("B");
        let r = HedgeReport::build(&model, &tree, &claim, &Tolerances::default());
        assert_eq!(r.exit_code(), 0);
        assert!(!r.flags.qstar_equivalent && r.flags.predicate.is_none());
        assert!(r.analysis.unavailable.iter().any(|u| u.section == "qstar"));
    }

    #[test]
    fn vanishing_density_is_refused() {
        let (model, tree, claim) = model_for("D");
        let r = HedgeReport::build(&model, &tree, &claim, &Tolerances::default());
        assert_eq!(r.exit_code(), 4);
        assert!(r.reason.unwrap().contains("vanishes"));
    }

    #[test]
    fn reverify_rejects_other_model() {
        let (model_a, tree, claim) = model_for("A");
        let r = HedgeReport::build(&model_a, &tree, &claim, &Tolerances::default());
        let (model_b, _, _) = model_for("B");
        assert!(matches!(reverify(&r, &model_b), Err(MvhError::ReportMismatch(_))));
    }
}
