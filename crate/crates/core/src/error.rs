use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("class index {value} out of range (num_classes = {num_classes})")]
    ClassOutOfRange { value: u16, num_classes: u16 },

    #[error("directory not found: {}", .0.display())]
    MissingDirectory(PathBuf),

    #[error("cannot decode image {}: {source}", path.display())]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("cannot encode image {}: {reason}", path.display())]
    Encode { path: PathBuf, reason: String },

    #[error("stem {stem:?} has no counterpart in {}", dir.display())]
    StemMismatch { stem: String, dir: PathBuf },

    #[error("inconsistent dimensions in {}: expected {expected:?}, found {found:?}", path.display())]
    DimensionMismatch {
        path: PathBuf,
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("malformed flow file {}: {reason}", path.display())]
    FlowFormat { path: PathBuf, reason: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("no candidate class found in answer {0:?}")]
    UnparseableAnswer(String),

    #[error("vlm transport error: {0}")]
    Transport(String),

    #[error("predictor failed: {0}")]
    Predictor(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
