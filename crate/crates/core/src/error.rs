use thiserror::Error;

/// Errors raised by estimation, inference and data handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("optimization failed after {evaluations} evaluations: {reason}")]
    OptimizationFailure {
        reason: String,
        evaluations: usize,
        trace: Vec<f64>,
    },

    #[error("scale matrix is numerically rank deficient (rank {rank} of 3)")]
    NumericalRank { rank: usize },

    #[error("invalid restriction: {0}")]
    InvalidRestriction(String),

    #[error("no root bracket: {0}")]
    NoBracket(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
