use thiserror::Error;
use tucker_core::TuckerError;

/// A failed command, classified by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Hypothesis(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io(_) => 3,
            Self::Solver(_) => 4,
            Self::Hypothesis(_) => 5,
        }
    }
}

impl From<TuckerError> for CliError {
    fn from(e: TuckerError) -> Self {
        let msg = e.to_string();
        match e {
            TuckerError::Io(_) | TuckerError::Format(_) => Self::Io(msg),
            TuckerError::Hypothesis(_) => Self::Hypothesis(msg),
            TuckerError::SvdFailed | TuckerError::NonFinite | TuckerError::ZeroNorm => Self::Solver(msg),
            TuckerError::Shape(_)
            | TuckerError::ModeOutOfRange { .. }
            | TuckerError::DimensionMismatch(_)
            | TuckerError::InvalidRank(_)
            | TuckerError::InvalidConfig(_)
            | TuckerError::Domain(_) => Self::Config(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
