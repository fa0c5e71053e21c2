use thiserror::Error;

/// Errors raised anywhere in the optimization engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A factorization kept failing after jitter escalation. Carries the last jitter tried.
    #[error("numerical failure in {context} (last jitter tried: {jitter:e})")]
    NumericalFailure { context: String, jitter: f64 },

    /// Two records share a `(node_id, seq)` key but carry different payloads.
    #[error("protocol violation: conflicting records for key (node {node_id}, seq {seq})")]
    ProtocolViolation { node_id: u32, seq: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
