use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("column `{0}` has no observed values")]
    EmptyStats(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("invalid synthetic spec: {0}")]
    Spec(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("pipeline error: {0}")]
    Pipeline(String),

    #[error("cosine distance is undefined for a zero vector")]
    UndefinedDistance,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used to pick a process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Internal,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Spec(_) => ErrorClass::Config,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Schema(_)
            | Error::EmptyStats(_)
            | Error::Size(_)
            | Error::Contract(_)
            | Error::Training(_)
            | Error::Pipeline(_)
            | Error::UndefinedDistance
            | Error::Csv(_)
            | Error::Json(_) => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
