use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum CalibError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter space: {0}")]
    InvalidSpace(String),

    #[error("value out of bounds: {0}")]
    OutOfBounds(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("linear algebra failure: {0}")]
    LinAlg(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("simulator failure: {0}")]
    Simulator(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CalibError>;
