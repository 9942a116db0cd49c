use thiserror::Error;

/// Errors raised by the model, graph, solver and metric routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("graph construction failed: {0}")]
    Construction(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("empty graph")]
    EmptyGraph,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("profile is not an equilibrium (residual {residual:e} exceeds {limit:e})")]
    NotAnEquilibrium { residual: f64, limit: f64 },

    #[error("no volume to distribute")]
    NoVolume,

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("empty input: {0}")]
    EmptyInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
