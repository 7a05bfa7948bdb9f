use std::path::PathBuf;

/// Errors produced anywhere in the detection pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unreadable file {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },

    #[error("unsupported codec in {path}: {reason}")]
    UnsupportedCodec { path: PathBuf, reason: String },

    #[error("zero-length audio in {0}")]
    EmptyAudio(PathBuf),

    #[error("clip has {samples} samples, shorter than one window of {window}")]
    ClipTooShort { samples: usize, window: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("covariance of component {component} is not positive definite")]
    SingularCovariance { component: usize },

    #[error("component index {index} out of range for a {count}-component model")]
    ComponentOutOfRange { index: usize, count: usize },

    #[error("labels must contain both classes (positives: {positives}, negatives: {negatives})")]
    SingleClass { positives: usize, negatives: usize },

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("cannot parse file name {name:?}: expected {expected}")]
    FileName {
        name: String,
        expected: &'static str,
    },

    #[error("missing directory {0}")]
    MissingDirectory(PathBuf),

    #[error("zero files in {0}")]
    ZeroFiles(PathBuf),

    #[error("model format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
