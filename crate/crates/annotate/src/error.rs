use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no label found in response {0:?}")]
    NoLabelFound(String),
    #[error("sample {0:?} has no text")]
    MissingText(String),
    #[error("unresolved template slot {{{0}}}")]
    UnresolvedSlot(String),
    #[error("strategy {0} needs a given candidate set for sample {1:?}")]
    MissingGivenSet(&'static str, String),
    #[error("embedding dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero-norm embedding")]
    ZeroEmbedding,
    #[error("requested {k} examples from a pool of {size}")]
    PoolTooSmall { k: usize, size: usize },
    #[error("no replay entry for sample {0:?}")]
    ReplayMiss(String),
    #[error("request failed: {0}")]
    Request(String),
    #[error("malformed completion response: {0}")]
    BadResponse(String),
    #[error("environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Core(#[from] candidate_distill::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Transport-level failures worth retrying.
    pub fn is_transient(&self) -> bool {
        matches!(self, Error::Request(_))
    }
}
