use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("value error at row {row}: {message}")]
    Value { row: usize, message: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("invalid split: {0}")]
    Split(String),

    #[error("invalid synthetic spec: {0}")]
    Synthetic(String),

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("hierarchy error: {0}")]
    Hierarchy(String),

    #[error("invalid learner spec: {0}")]
    Learner(String),

    #[error("empty training group `{0}`")]
    EmptyGroup(String),

    #[error("invalid epsilon spec: {0}")]
    Epsilon(String),

    #[error("groups `{0}` and `{1}` overlap")]
    Overlap(String, String),

    #[error("no leaf covers example with attributes {0}")]
    Routing(String),

    #[error("prepend did not terminate within cap of {cap} rounds")]
    PrependCap {
        cap: usize,
        partial: Box<crate::algorithms::DecisionList>,
    },

    #[error("model/data mismatch: {0}")]
    Mismatch(String),

    #[error("invalid experiment config: {0}")]
    Config(String),

    #[error("method `{method}` failed in trial {trial}: {source}")]
    Trial {
        method: String,
        trial: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the environment (files, parsing) rather
    /// than by the data or the learning problem.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Json(_))
            || matches!(self, Error::Csv(e) if e.is_io_error())
    }
}
