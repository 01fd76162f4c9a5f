//! Mean-variance hedging on finite event trees with signed martingale
//! measures.

pub mod analysis;
pub mod check;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod generate;
pub mod hedge;
pub mod linalg;
pub mod numeraire;
pub mod oracle;
pub mod process;
pub mod projection;
pub mod qstar;
pub mod report;
pub mod suite;
pub mod tree;
pub mod vsmm;

pub use error::{MvhError, Result};
