use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("unsupported dimension {0}: transform length must be a power of two")]
    UnsupportedDimension(usize),

    #[error("index {index} out of range for universe of size {universe}")]
    InvalidIndex { index: usize, universe: usize },

    #[error("invalid sensing spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("solver breakdown at iteration {iteration}: zero search-direction curvature")]
    Breakdown { iteration: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
