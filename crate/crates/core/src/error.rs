use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("duplicate note id `{0}`")]
    DuplicateNoteId(String),

    #[error("cannot build an index over an empty document set")]
    EmptyIndex,

    #[error("unknown document `{0}`")]
    UnknownDocument(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("training diverged at step {step}")]
    Diverged { step: usize },

    #[error("verifier failed: {0}")]
    Verifier(String),

    #[error("generator failed: {0}")]
    Generator(String),

    #[error("aggregates were computed on different prompt sets")]
    PromptSetMismatch,

    #[error("index format version {found} is not supported (expected {expected})")]
    IndexVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn ensure_finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite(format!("{what} = {value}")))
    }
}
