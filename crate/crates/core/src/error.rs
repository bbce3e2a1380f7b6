use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parameter outside its domain: {0}")]
    Domain(String),

    #[error("assemblage shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid assemblage: {0}")]
    InvalidAssemblage(String),

    #[error("invalid measurement set: {0}")]
    InvalidMeasurement(String),

    #[error("invalid Kraus filter: {0}")]
    InvalidFilter(String),

    #[error("filter outcome {outcome} has probability {probability:e}")]
    ZeroProbabilityBranch { outcome: usize, probability: f64 },

    #[error("insufficient counts: {0}")]
    InsufficientCounts(String),

    #[error("solver failure: {0}")]
    SolverFailure(String),

    #[error("malformed assemblage file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
