use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("spectral function is not finite at eigenvalue {eigenvalue}")]
    NonFiniteSpectralValue { eigenvalue: f64 },

    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("missing labels: {0}")]
    MissingLabels(String),

    #[error("missing kernel cache for dataset `{dataset}` ({kind}); run the kernel precompute step first")]
    MissingKernel { dataset: String, kind: String },

    #[error("empty validation set")]
    EmptyValidation,

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("missing required file {0}")]
    MissingFile(PathBuf),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("truncated file at byte offset {0}")]
    Truncated(u64),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::ShapeMismatch {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }
}
