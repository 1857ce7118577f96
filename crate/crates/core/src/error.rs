use thiserror::Error;

pub type Result<T> = std::result::Result<T, TuckerError>;

#[derive(Debug, Error)]
pub enum TuckerError {
    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("mode {mode} out of range for a tensor with {order} modes")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid rank: {0}")]
    InvalidRank(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in input")]
    NonFinite,

    #[error("SVD failed to converge")]
    SvdFailed,

    #[error("zero-norm tensor has no relative error")]
    ZeroNorm,

    #[error("parameter outside its domain: {0}")]
    Domain(String),

    #[error("theorem hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("malformed tensor file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
