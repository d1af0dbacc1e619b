use std::io;
use std::path::PathBuf;

use advseg_tensor::TensorError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("incomplete case: {case} is missing {missing}")]
    IncompleteCase { case: String, missing: String },
    #[error("inconsistent geometry: {0}")]
    InconsistentGeometry(String),
    #[error("format error: {path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("invalid label alphabet: found value {0}")]
    InvalidLabel(u8),
    #[error("non-binary channels: found value {0}")]
    NonBinary(f32),
    #[error("phantom too small: size {size} (minimum 16)")]
    PhantomTooSmall { size: usize },
    #[error("patch exceeds volume: patch {patch:?}, volume {volume:?}")]
    PatchExceedsVolume { patch: [usize; 3], volume: [usize; 3] },
    #[error("shape not divisible by {multiple}: spatial dims {dims:?}")]
    NotDivisible { multiple: usize, dims: Vec<usize> },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("non-finite loss at step {step}; diagnostics written to {}", dump.display())]
    NonFinite { step: u64, dump: PathBuf },
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        Error::Format { path: path.into(), msg: msg.to_string() }
    }

    /// Process exit code: 2 for configuration problems, 3 for numerical
    /// aborts, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::NonFinite { .. } => 3,
            _ => 1,
        }
    }
}
