use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The statistics needed for a quantity are not yet well defined.
    /// Callers treat this as "continue sampling".
    #[error("not ready: {0}")]
    NotReady(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("infeasible pair (context {context}, action {action})")]
    InfeasiblePair { context: usize, action: usize },

    #[error("data source exhausted at stage {0}")]
    SourceExhausted(u64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
