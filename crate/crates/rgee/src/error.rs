//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("index {index} out of bounds for {what} of size {size}")]
    Bounds {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("invalid parameter: {0}")]
    Params(String),

    #[error("class {class} has no labelled vertices; compact the labels first")]
    DegenerateClass { class: u32 },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("shape mismatch: {0}")]
    Shape(String),
}

impl Error {
    pub(crate) fn params(msg: impl Into<String>) -> Self {
        Error::Params(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
