use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the calibration toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("patch grid does not fit in frame: needs {needed_axial}x{needed_lateral}, frame is {axial}x{lateral}")]
    GridOverflow {
        needed_axial: usize,
        needed_lateral: usize,
        axial: usize,
        lateral: usize,
    },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("empty input")]
    EmptyInput,
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("bad magic bytes (expected {expected:?})")]
    BadMagic { expected: &'static str },
    #[error("file truncated: {0}")]
    TruncatedFile(String),
    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("invalid rate-conversion factors interp={interp}, decim={decim}")]
    InvalidFactors { interp: usize, decim: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("spectral grid mismatch: {0}")]
    GridMismatch(String),
    #[error("non-finite value in input")]
    NonFiniteInput,
    #[error("depth segment {segment} out of range (transfer function has {n_segments})")]
    SegmentOutOfRange { segment: usize, n_segments: usize },
    #[error("patch axial length {axial} exceeds FFT size {fft_size}")]
    SizeMismatch { axial: usize, fft_size: usize },
    #[error("input dimension mismatch: model expects {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("training set contains a single class")]
    SingleClassDataset,
    #[error("incompatible datasets: {0}")]
    IncompatibleDatasets(String),
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error("missing dataset file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
