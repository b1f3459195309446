use std::path::PathBuf;

use thiserror::Error;

use crate::estimation::CandidateFit;
use crate::model_selection::SelectionReport;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum EpdcError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("invalid photon-number distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("insufficient data: {0}")]
    Arity(String),

    #[error("parameters not identifiable: {0}")]
    Identifiability(String),

    #[error("fit did not converge after {starts} start(s); best chi2 = {:.6e}", .best.chi2)]
    NonConvergence { starts: usize, best: Box<CandidateFit> },

    #[error("singular covariance; unidentifiable parameters: {}", .parameters.join(", "))]
    SingularCovariance { parameters: Vec<String> },

    #[error("no candidate satisfied the selection rule")]
    SelectionFailure { report: Box<SelectionReport> },

    #[error("no crossover: {0}")]
    NoCrossover(String),

    #[error("photon cutoff {cutoff} too small: neglected tail mass {tail:.3e} exceeds 1e-14")]
    TailMass { cutoff: usize, tail: f64 },

    #[error("{}:{line}: {message}", .path.display())]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("unit error: {0}")]
    Unit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl EpdcError {
    /// Process exit code used by the command-line frontend.
    pub fn exit_code(&self) -> i32 {
        match self {
            EpdcError::NonConvergence { .. } => 3,
            EpdcError::SelectionFailure { .. } => 4,
            EpdcError::Io { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, EpdcError>;
