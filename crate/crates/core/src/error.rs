use thiserror::Error;

/// Errors raised by the core pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what}: non-finite value at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("{what}: expected even length, got {len}")]
    OddLength { what: &'static str, len: usize },

    #[error("{what}: length mismatch (expected {expected}, got {got})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what}: empty input")]
    Empty { what: &'static str },

    #[error("zero-pad target {target} is shorter than input length {len}")]
    PadTooShort { len: usize, target: usize },

    #[error("{what}: spectrum is not Hermitian (bin {bin}, deviation {deviation:.3e})")]
    NotHermitian {
        what: &'static str,
        bin: usize,
        deviation: f64,
    },

    #[error("transmitted spectrum is zero on active bin {bin}")]
    ZeroSubcarrier { bin: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid network: {0}")]
    Network(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
