use std::io;

use thiserror::Error;

/// Errors produced across the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid radar configuration: {0}")]
    InvalidConfig(String),

    #[error("target out of range: {0}")]
    OutOfRange(String),

    #[error("target aliases outside the unambiguous range/velocity window: {0}")]
    Aliasing(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: String, got: String },

    #[error("segment centred at ({range_bin}, {doppler_bin}) does not fit inside the map")]
    SegmentOutOfBounds { range_bin: usize, doppler_bin: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training data problem: {0}")]
    Data(String),

    #[error("training diverged after {0} restarts")]
    Diverged(usize),

    #[error("pruning removed every edge; thresholds too aggressive")]
    PrunedEverything,

    #[error("unknown detector or rule `{0}`")]
    UnknownDetector(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn dimension(expected: impl ToString, got: impl ToString) -> Self {
        Self::Dimension {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
