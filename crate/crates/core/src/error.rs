use thiserror::Error;

/// Errors produced across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not primitive: no power up to {bound} is entrywise positive")]
    NotPrimitive { bound: usize },

    #[error("power iteration did not converge within {iterations} iterations (last change {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("Perron-Frobenius eigenvalue {0} is not 1 (rescale the matrix by its inverse)")]
    NotCritical(f64),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numeric overflow: state component {value:e} exceeds guard {guard:e}")]
    NumericOverflow { value: f64, guard: f64 },

    #[error("drift has a negative component {value} at state {state:?}")]
    NegativeDrift { state: Vec<f64>, value: f64 },

    #[error("no trajectory reached the upper level")]
    NoDivergentTrajectories,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}
