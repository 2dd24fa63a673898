use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box ({x1}, {y1}, {x2}, {y2}): {reason}")]
    InvalidBox {
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        reason: &'static str,
    },

    #[error("invalid frame clock: fps must be positive and finite, got {0}")]
    InvalidClock(f64),

    #[error("invalid latency model: {0}")]
    InvalidModel(String),

    #[error("negative or non-finite delay: {0}")]
    InvalidDelay(String),

    #[error("latency trace exhausted: draw {index} requested but trace holds {len} samples")]
    TraceExhausted { index: usize, len: usize },

    #[error("trace parse error at line {line}: {message}")]
    TraceParse { line: u64, message: String },

    #[error("frame {index} out of range (world has {len} frames)")]
    FrameOutOfRange { index: usize, len: usize },

    #[error("invalid world: {0}")]
    InvalidWorld(String),

    #[error("invalid observer: {0}")]
    InvalidObserver(String),

    #[error("stream log does not belong to this ground truth (log {log}, ground truth {truth})")]
    DigestMismatch { log: String, truth: String },

    #[error("stream log line {line}: {message}")]
    LogParse { line: usize, message: String },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("COCO annotations: {0}")]
    Coco(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// I/O failure on `path`.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
