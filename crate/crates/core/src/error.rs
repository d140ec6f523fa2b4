use thiserror::Error;

/// Errors raised by the spectral and fitting primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(&'static str),
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("invalid parameter `{name}`: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("frequency index ({0}, {1}) outside grid of size {2}")]
    IndexOutOfRange(usize, usize, usize),
    #[error("frequency ({0}, {1}) is not aligned to a DFT bin of an {2}x{2} grid")]
    NotBinAligned(f64, f64, usize),
    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),
    #[error("empty data")]
    EmptyData,
}

pub type Result<T> = core::result::Result<T, Error>;
