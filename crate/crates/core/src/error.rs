use thiserror::Error;

use crate::tree::ValidationReport;

#[derive(Debug, Error)]
pub enum MvhError {
    #[error("invalid model:\n{0}")]
    InvalidModel(ValidationReport),

    #[error("no equivalent martingale measure: {0}")]
    NoEquivalentMartingaleMeasure(String),

    #[error("g* vanishes on {count} terminal state(s); the numeraire change is unavailable")]
    DensityVanishes { count: usize },

    #[error("feedback representation unavailable: VSMM is signed")]
    SignedVsmm,

    #[error("measure is not strictly positive on the edge into node {0}")]
    NonPositiveMeasure(String),

    #[error("unknown fixture {0:?}")]
    UnknownFixture(String),

    #[error("unknown claim {0:?}")]
    UnknownClaim(String),

    #[error("oracle size cap exceeded: {terminals} terminal nodes (max {max})")]
    OracleTooLarge { terminals: usize, max: usize },

    #[error("generator: {0}")]
    Generator(String),

    #[error("report does not match model: {0}")]
    ReportMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MvhError>;
