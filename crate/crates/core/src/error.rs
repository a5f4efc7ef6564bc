use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("edf: truncated at byte {offset}: expected {expected} bytes, found {actual}")]
    Truncated {
        offset: usize,
        expected: usize,
        actual: usize,
    },

    #[error("edf: header field `{field}` at byte {offset} is not a valid number: {raw:?}")]
    HeaderField {
        field: &'static str,
        offset: usize,
        raw: String,
    },

    #[error("edf: {0}")]
    Format(String),

    #[error("edf: bad annotation at byte {offset}: {msg}")]
    Annotation { offset: usize, msg: String },

    #[error("unknown annotation label {0:?}; expected T0, T1 or T2")]
    UnknownLabel(String),

    #[error("montage: {0}")]
    Montage(String),

    #[error("filter: {0}")]
    Filter(String),

    #[error("non-finite input value at index {0}")]
    NonFinite(usize),

    #[error("empty input")]
    Empty,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("trial too short: need {needed} samples, have {available}")]
    TooShort { needed: usize, available: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("unsupported {what} version {found} (this build reads up to {supported})")]
    Version {
        what: &'static str,
        found: u32,
        supported: u32,
    },

    #[error("feature store: {0}")]
    Store(String),

    #[error("too few units for {folds} folds: have {have}")]
    TooFewUnits { folds: usize, have: usize },

    #[error("input contains a single class; both classes are required")]
    SingleClass,

    #[error("stale cache: {0}")]
    StaleCache(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
