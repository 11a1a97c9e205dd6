//! Error type shared across the crate.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image decode error at {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("malformed npy file at {path}: {msg}")]
    Npy { path: PathBuf, msg: String },
    #[error("json error at {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("shape mismatch: expected {expected_width}x{expected_height}, got {width}x{height}")]
    Shape {
        expected_width: u32,
        expected_height: u32,
        width: u32,
        height: u32,
    },
    #[error("validation error: {0}")]
    Validation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("missing pair for sample '{stem}': no loss or probability map")]
    MissingPair { stem: String },
    #[error("empty dataset at {root}: no mask files found under masks/")]
    EmptyDataset { root: PathBuf },
    #[error("sample '{sample_id}': {source}")]
    Sample {
        sample_id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attaches a sample id to an error propagated from per-sample processing.
    pub fn with_sample(self, sample_id: &str) -> Self {
        Error::Sample {
            sample_id: sample_id.to_string(),
            source: Box::new(self),
        }
    }
}
