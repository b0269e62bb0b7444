use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mask has no foreground pixels")]
    EmptyMask,

    #[error("degenerate pose: {0}")]
    DegeneratePose(&'static str),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("ridge system is singular at {0} frequency bins (lambda = 0)")]
    Singular(usize),

    #[error("tracker used before initialization")]
    NotInitialized,

    #[error("no source point within attention radius of target cell ({row}, {col})")]
    EmptyNeighborhood { row: usize, col: usize },

    #[error("numerical failure: {0}")]
    Numerical(&'static str),

    #[error("object {0} has no feature points")]
    EmptyFeature(usize),

    #[error("feature shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
