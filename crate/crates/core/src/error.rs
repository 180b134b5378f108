use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("out of range: {0}")]
    Range(String),
    /// A task or technician id that does not resolve.
    #[error("integrity error: unknown {kind} `{id}`")]
    UnknownId { kind: &'static str, id: String },
    /// A reference that cannot hold, such as a duplicate id or an index
    /// outside the instance.
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("task `{0}` is pinned")]
    PinViolation(String),
    #[error("stale suggestion: generated at revision {expected}, schedule is at {actual}")]
    Stale { expected: u64, actual: u64 },
    #[error("invalid state: {0}")]
    State(String),
    #[error("schedule is not initialized; unassigned tasks: {}", .0.join(", "))]
    Uninitialized(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
