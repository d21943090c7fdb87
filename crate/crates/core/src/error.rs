use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("assignment has length {got}, formula has {expected} variables")]
    LengthMismatch { expected: usize, got: usize },

    #[error("dimacs line {line}: {msg}")]
    Dimacs { line: usize, msg: String },

    #[error("n = {n} exceeds the enumeration limit {limit}")]
    EnumerationLimit { n: usize, limit: usize },

    #[error("trajectory was recorded with stride {0}; full resolution is required")]
    DownSampled(usize),

    #[error("walksat step called on a satisfying state")]
    AlreadySatisfied,

    #[error("resume conflict: {0}")]
    ResumeConflict(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn params(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }
}
