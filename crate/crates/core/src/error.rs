use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tensor shape must have at least one dimension")]
    EmptyShape,
    #[error("invalid shape {0:?}: every dimension must be at least 1")]
    ZeroDimension(Vec<usize>),
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { len: usize, shape: Vec<usize> },
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("index {index:?} out of range for shape {shape:?}")]
    IndexOutOfRange { index: Vec<usize>, shape: Vec<usize> },
    #[error("expected a rank-{expected} tensor, got shape {shape:?}")]
    Rank { expected: usize, shape: Vec<usize> },
    #[error("channel mismatch: input has {input} channels, parameters expect {expected}")]
    ChannelMismatch { input: usize, expected: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("{op} needs even height and width, got {height}x{width}")]
    OddSpatial { op: &'static str, height: usize, width: usize },
    #[error("input is {height}x{width}; height and width must both be divisible by 4")]
    NotDivisibleBy4 { height: usize, width: usize },
    #[error("backward pass needs the cache from a forward call with keep_cache = true")]
    MissingCache,
    #[error("invalid haze parameters: {0}")]
    InvalidHaze(String),
    #[error("transmission {t} is below the inversion guard {t_min}")]
    TransmissionTooSmall { t: f64, t_min: f64 },
    #[error("image {height}x{width} is smaller than the {window}x{window} SSIM window")]
    ImageTooSmall { height: usize, width: usize, window: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite gradient in {0}; optimizer step aborted")]
    NonFiniteGradient(String),
    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { loss: f64, epoch: usize, batch: usize },
    #[error("{path}:{line}: {message}")]
    Manifest { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

/// Failures while decoding a checkpoint file. Each corruption mode has its own variant.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad checkpoint magic {0:?}, expected \"LCAN\"")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint holds {found} tensors, expected {expected}")]
    TensorCount { expected: usize, found: usize },
    #[error("unexpected tensor {found:?} in checkpoint, expected {expected:?}")]
    UnexpectedTensor { expected: String, found: String },
    #[error("layer {layer}: shape {found:?} does not match expected {expected:?}")]
    ShapeMismatch { layer: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("checkpoint truncated while reading {0}")]
    Truncated(&'static str),
    #[error("checkpoint has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("tensor name is not valid UTF-8")]
    InvalidName,
}

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed image header: {0}")]
    MalformedHeader(String),
    #[error("truncated image payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("png decode: {0}")]
    Png(String),
}
