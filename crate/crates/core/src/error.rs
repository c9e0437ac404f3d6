use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A dialogue broke one of its structural invariants.
    #[error("dialogue `{dialogue}`: {message}")]
    InvalidDialogue { dialogue: String, message: String },

    /// A line of a JSONL file could not be parsed.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("prediction references unknown dialogue `{0}`")]
    UnknownDialogue(String),

    /// Training produced a non-finite loss.
    #[error("non-finite loss at epoch {epoch}")]
    NonFinite { epoch: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dialogue(id: &str, message: impl Into<String>) -> Self {
        Error::InvalidDialogue {
            dialogue: id.to_string(),
            message: message.into(),
        }
    }
}
