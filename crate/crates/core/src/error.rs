use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("dense size guard: {what} has dimension {dim}, limit is {limit}")]
    SizeGuard {
        what: String,
        dim: usize,
        limit: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
