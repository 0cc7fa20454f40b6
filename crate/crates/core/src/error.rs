use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("landmark {index} at ({x:.3}, {y:.3}) falls outside the {width}x{height} image")]
    OutOfFrame {
        index: usize,
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("degenerate face: {0}")]
    DegenerateFace(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("degenerate data: total variance {0:e} is too small for PCA")]
    DegenerateData(f64),
    #[error("rank {k} outside 1..={max}")]
    BadRank { k: usize, max: usize },
    #[error("unsupported sample rate {0} Hz")]
    UnsupportedRate(u32),
    #[error("audio too short: {samples} samples, need at least {needed}")]
    TooShort { samples: usize, needed: usize },
    #[error("delay {delay} must be smaller than sequence length {len}")]
    DelayTooLarge { delay: usize, len: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("size mismatch: expected {expected:?}, got {actual:?}")]
    SizeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("mouth bounding box is empty after clamping")]
    EmptyBox,
    #[error("text is empty")]
    EmptyText,
    #[error("clip {clip}: {audio_frames} audio frames vs {video_frames} video frames")]
    Alignment {
        clip: usize,
        audio_frames: usize,
        video_frames: usize,
    },
    #[error("missing or empty file: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("target clip has {available} frames, render needs {needed}")]
    InsufficientTargetFrames { needed: usize, available: usize },
    #[error("verification failed: {}", .0.join("; "))]
    VerificationFailed(Vec<String>),
    #[error("parse error in {}: {msg}", path.display())]
    Parse { path: PathBuf, msg: String },
    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("wav error on {}: {source}", path.display())]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },
}

impl Error {
    /// Stable machine-readable error name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OutOfFrame { .. } => "OutOfFrame",
            Error::DegenerateFace(_) => "DegenerateFace",
            Error::InvalidParams(_) => "InvalidParams",
            Error::DegenerateData(_) => "DegenerateData",
            Error::BadRank { .. } => "BadRank",
            Error::UnsupportedRate(_) => "UnsupportedRate",
            Error::TooShort { .. } => "TooShort",
            Error::DelayTooLarge { .. } => "DelayTooLarge",
            Error::EmptyDataset => "EmptyDataset",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::SizeMismatch { .. } => "SizeMismatch",
            Error::EmptyBox => "EmptyBox",
            Error::EmptyText => "EmptyText",
            Error::Alignment { .. } => "AlignmentError",
            Error::MissingFile(_) => "MissingFile",
            Error::InsufficientTargetFrames { .. } => "InsufficientTargetFrames",
            Error::VerificationFailed(_) => "VerificationFailed",
            Error::Parse { .. } => "ParseError",
            Error::Io { .. } => "IoError",
            Error::Wav { .. } => "WavError",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.to_string(),
        }
    }
}
