//! Verdicts and tolerances for the numerical identity checks.

use serde::{Deserialize, Serialize};

use crate::process::{AdaptedProcess, EdgeMeasure};
use crate::tree::EventTree;

/// Environment variable overriding the identity tolerance.
pub const TOL_ENV: &str = "MVH_TOL";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative tolerance for algebraic identities.
    pub identity: f64,
    /// Relative tolerance for agreement with the independent oracle.
    pub oracle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { identity: 1e-9, oracle: 1e-8 }
    }
}

impl Tolerances {
    /// Identity tolerance `tol`; the oracle tolerance keeps its 10x ratio.
    pub fn with_identity(tol: f64) -> Self {
        Tolerances { identity: tol, oracle: 10.0 * tol }
    }

    /// Tighter tolerance for identities that hold to round-off by
    /// construction (density constraints, the mean term of the GKW split).
    pub fn strict(&self) -> f64 {
        self.identity / 10.0
    }

    /// Flag value, else `MVH_TOL`, else the defaults.
    pub fn resolve(flag: Option<f64>) -> Self {
        if let Some(tol) = flag {
            return Self::with_identity(tol);
        }
        match std::env::var(TOL_ENV).ok().and_then(|v| v.trim().parse::<f64>().ok()) {
            Some(tol) if tol > 0.0 => Self::with_identity(tol),
            _ => Self::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Verdict {
    /// Passes when `residual / scale <= tolerance`.
    pub fn relative(check: &str, residual: f64, scale: f64, tolerance: f64) -> Self {
        let dev = relative(residual, scale);
        Verdict { check: check.to_string(), max_deviation: dev, tolerance, passed: dev <= tolerance }
    }

    /// A check whose outcome is decided elsewhere; `deviation` is reported
    /// as-is.
    pub fn decided(check: &str, passed: bool, deviation: f64, tolerance: f64) -> Self {
        Verdict { check: check.to_string(), max_deviation: deviation, tolerance, passed }
    }
}

/// `residual / scale`, with an exact zero residual always mapping to zero.
pub fn relative(residual: f64, scale: f64) -> f64 {
    if residual == 0.0 {
        0.0
    } else {
        residual.abs() / scale.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Worst one-step defect `|sum_c mu(c|n) X(c) - X(n)|` over non-terminal
/// nodes.
pub fn martingale_defect(tree: &EventTree, x: &AdaptedProcess, measure: &EdgeMeasure) -> f64 {
    tree.non_terminals()
        .iter()
        .map(|&n| {
            let next: f64 = tree.children(n).iter().map(|&c| measure.weight(c) * x[c]).sum();
            (next - x[n]).abs()
        })
        .fold(0.0, f64::max)
}

/// Accumulates the worst residual and the largest natural magnitude seen
/// across many entries of one identity.
#[derive(Debug, Clone, Copy, Default)]
pub struct Deviation {
    pub residual: f64,
    pub scale: f64,
}

impl Deviation {
    pub fn add(&mut self, residual: f64, scale: f64) {
        self.residual = self.residual.max(residual.abs());
        self.scale = self.scale.max(scale.abs());
    }

    pub fn verdict(&self, check: &str, tolerance: f64) -> Verdict {
        Verdict::relative(check, self.residual, self.scale, tolerance)
    }
}
