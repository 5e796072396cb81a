//! Crate-wide error types.

use thiserror::Error;

/// Errors produced by the library surface.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid argument or precondition violation in a pure computation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A survival curve cannot be identified from the given observations.
    #[error("CDF unidentifiable: {0}")]
    Unidentifiable(String),

    /// Requested quantile lies above the identifiable range of the curve.
    #[error("quantile beyond identifiable range: q={q}, max attained F={max_f}")]
    QuantileOutOfRange { q: f64, max_f: f64 },

    /// Dataset-level problem (malformed line, duplicate id, missing file).
    #[error("data error: {0}")]
    Data(String),

    /// Backend failure that may succeed on retry (timeouts, 5xx).
    #[error("backend retryable failure: {0}")]
    BackendRetryable(String),

    /// Backend failure that will not succeed on retry (4xx, protocol).
    #[error("backend fatal failure: {0}")]
    BackendFatal(String),

    /// I/O wrapper.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Serialization wrapper.
    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    /// Attach a question id to a backend error so sweep logs can place it.
    pub fn with_question(self, id: &str) -> Self {
        match self {
            Error::BackendRetryable(m) => Error::BackendRetryable(format!("[{id}] {m}")),
            Error::BackendFatal(m) => Error::BackendFatal(format!("[{id}] {m}")),
            other => other,
        }
    }

    /// True when retrying the same call may succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::BackendRetryable(_))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
