use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("buffer length {actual} does not match {expected} for the declared dimensions")]
    BufferLength { expected: usize, actual: usize },
    #[error("image is empty")]
    EmptyImage,
    #[error("image {width}x{height} is smaller than the required {min}x{min}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("empty flare band")]
    EmptyFlareBand,
    #[error("undefined metric: selected mask region is empty")]
    UndefinedMetric,
    #[error("duplicate scene id `{0}`")]
    DuplicateScene(String),
    #[error("missing tensor `{0}`")]
    MissingTensor(String),
    #[error("tensor `{name}` has shape {actual:?}, expected {expected:?}")]
    TensorShape {
        name: String,
        expected: alloc::vec::Vec<usize>,
        actual: alloc::vec::Vec<usize>,
    },
    #[error("token {token} out of range for embedding table with {rows} rows")]
    TokenOutOfRange { token: usize, rows: usize },
    #[error("need at least {needed} feature vectors, got {got}")]
    NotEnoughVectors { needed: usize, got: usize },
    #[error("loss diverged (non-finite) at iteration {0}")]
    Diverged(usize),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
