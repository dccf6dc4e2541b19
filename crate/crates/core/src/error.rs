use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),

    #[error("kernel does not declare a tail limit; the s -> 0 weight b(x) needs one")]
    MissingTailLimit,

    #[error("kernel is not periodic with period 1 in x")]
    NotPeriodic,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("grid function does not vanish on the box boundary (max |u| = {0:e})")]
    BoundaryNotZero(f64),

    #[error("h_max = {h_max} is too small; it must be at least {required}")]
    TailTooClose { h_max: f64, required: f64 },

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("expression error at column {column}: {message}")]
    Expression { column: usize, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
