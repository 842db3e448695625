use std::io;

/// Errors raised across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid range: [{low}, {high}) is empty")]
    InvalidRange { low: f64, high: f64 },

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("observations are incompatible: {0}")]
    Incompatible(String),

    #[error("quantizer overflow: |value/delta| = {0:e} exceeds 2^62")]
    Overflow(f64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("matrix is rank deficient (min |R_ii| = {0:e})")]
    SingularMatrix(f64),

    #[error("support enumeration refused: C({n}, {k}) = {count} exceeds cap {cap}")]
    EnumerationCap { n: usize, k: usize, count: u128, cap: u128 },

    #[error("no consistent solution found: {0}")]
    NotFound(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("iteration did not converge: {0}")]
    Iteration(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
