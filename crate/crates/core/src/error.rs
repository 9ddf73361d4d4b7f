use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument or configuration value violates a documented constraint.
    #[error("{field}: {reason}")]
    Domain { field: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("event scheduled in the past: now {now_us} us, event at {at_us} us")]
    PastEvent { now_us: u64, at_us: u64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),
}

impl Error {
    pub fn domain(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Domain {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
