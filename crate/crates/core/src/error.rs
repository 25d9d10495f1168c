use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degree overflow: {0}")]
    DegreeOverflow(String),
    #[error("precision error: {0}")]
    Precision(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("promise violation: {0}")]
    PromiseViolation(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("penalty too large: {0}")]
    PenaltyTooLarge(String),
    #[error("invalid gate: {0}")]
    InvalidGate(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
