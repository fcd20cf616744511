use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Validation { field: String, reason: String },

    #[error("{path}: line {line}: {reason}")]
    Schema {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("referential integrity: {0}")]
    Integrity(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("canonical cache miss for {text:?}")]
    CacheMiss {
        text: String,
        caption_id: Option<String>,
    },

    #[error("canonical cache has no entry for captions {}", caption_ids.join(", "))]
    CacheMisses { caption_ids: Vec<String> },

    #[error("canonicalization endpoint failed for batches {batches:?}: {reason}")]
    Endpoint { batches: Vec<usize>, reason: String },

    #[error("canonicalization protocol error: {0}")]
    Protocol(String),

    #[error("degenerate encoding: {0}")]
    Degenerate(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty input text")]
    EmptyText,
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a caption id to a cache miss so callers can report which record failed.
    pub fn with_caption_id(self, id: &str) -> Self {
        match self {
            Error::CacheMiss { text, caption_id: None } => Error::CacheMiss {
                text,
                caption_id: Some(id.to_string()),
            },
            other => other,
        }
    }
}
