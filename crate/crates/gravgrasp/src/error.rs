use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    Mesh { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Dataset {
        path: PathBuf,
        #[source]
        source: crate::dataset::FormatError,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("no score file for object `{0}`")]
    MissingScores(String),
    #[error("{0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Self::Json { path: path.into(), source }
    }

    /// Process exit code: 2 for bad data or inputs, 3 for internal faults.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Internal(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
