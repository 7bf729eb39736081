use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything the pipeline can fail with.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("no input frames found in {0}")]
    EmptyInput(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("image dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (u32, u32),
        right: (u32, u32),
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("UTG validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("unknown UTG node {0:?}")]
    UnknownNode(String),

    #[error("path enumeration exceeded {limit} (limit {value})")]
    PathExplosion { limit: &'static str, value: usize },

    #[error("target node {0:?} is unreachable from the launch node")]
    Unreachable(String),

    #[error("index sequence is empty")]
    NoInput,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn decode(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Decode {
            path: path.into(),
            reason: reason.to_string(),
        }
    }
}
