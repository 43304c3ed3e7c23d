use thiserror::Error;

use crate::gesture::Gesture;

/// Errors produced by the signal pipeline, classifier, decoder and ingest layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no usable channels")]
    NoUsableChannels,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("not a probability vector: {0}")]
    NotAProbability(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("class '{0}' absent from training split")]
    MissingClass(Gesture),

    #[error("gesture '{0}' absent from dataset")]
    GestureAbsent(Gesture),

    #[error("recording shorter than schedule: cue {cue} ({gesture}) is not covered")]
    RecordingTooShort { cue: usize, gesture: Gesture },

    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("unexpected end of samples at offset {offset}")]
    Truncated { offset: u64 },

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error("degenerate rest signal")]
    DegenerateRest,

    #[error("all differences are zero")]
    AllZeroDifferences,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
