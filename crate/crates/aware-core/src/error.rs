use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("ingestion error: missing required file {file}")]
    MissingFile { file: String },

    #[error("format error in {file} line {line}: {message}")]
    Format {
        file: String,
        line: usize,
        message: String,
    },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("enumeration budget exceeded: {message} (budget {budget})")]
    Budget { message: String, budget: u64 },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("undefined metric: {0}")]
    Metric(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("non-finite value in {op} at entry {index}")]
    NonFinite { op: &'static str, index: usize },

    #[error("training aborted: non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn shape(op: &'static str, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::Shape {
            op,
            expected: expected.into(),
            got: got.into(),
        }
    }
}
