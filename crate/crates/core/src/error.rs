use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("cannot parse scalar {0:?}")]
    ScalarParse(String),
    #[error("budget infeasible: {0}")]
    Budget(String),
    #[error("search exhausted after {tries} tries: {what}")]
    Exhausted { tries: usize, what: String },
    #[error("model validation failed at component ({level},{index}): {reason}")]
    Validation {
        level: usize,
        index: usize,
        reason: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
