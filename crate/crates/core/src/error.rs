use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("label space needs at least two categories, got {0}")]
    TooFewClasses(usize),
    #[error("duplicate category name {0:?}")]
    DuplicateCategory(String),
    #[error("label out of range: {label} not in [0, {num_classes})")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("empty candidate set")]
    EmptyCandidateSet,
    #[error("invalid probability vector: {0}")]
    InvalidProbVector(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("unknown sample id {0:?}")]
    UnknownSample(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("training diverged at epoch {epoch}: {what} is not finite")]
    Diverged { epoch: usize, what: &'static str },
    #[error("invalid theory parameters: {0}")]
    InvalidParams(String),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("did not converge after {steps} steps (gradient norm {residual:e})")]
    NotConverged { steps: usize, residual: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Attaches a 1-based line number to an error raised while reading line-oriented files.
    pub fn at_line(self, line: usize) -> Self {
        match self {
            Error::Parse { .. } => self,
            other => Error::Parse { line, message: other.to_string() },
        }
    }
}
