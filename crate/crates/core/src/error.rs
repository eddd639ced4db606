use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulator and the network toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty population: {0}")]
    EmptyPopulation(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("index {index} out of range 1..={max}")]
    Index { index: usize, max: usize },

    #[error("missing base rate for month {0}")]
    MissingRate(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("graph integrity: {0}")]
    Graph(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("io error on {path}: {source}")]
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

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
