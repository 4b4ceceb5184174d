use alloc::string::String;
use core::fmt;

/// Errors shared by all modules of this crate.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside the documented domain of an operation.
    InvalidParameter(String),
    /// Two arguments that must live on the same lattice (same `q`, and where
    /// relevant the same `n`) do not.
    DimensionMismatch { expected: usize, got: usize },
    /// An operation would enumerate or materialize more lattice points than
    /// the configured cap allows.
    CapExceeded { size: u128, cap: u64 },
    /// A set of masses does not form a probability distribution.
    NotADistribution(String),
    /// A randomized search exhausted its trial budget without a certificate.
    SearchFailed(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::CapExceeded { size, cap } => {
                write!(f, "lattice size {size} exceeds cap {cap}")
            }
            Error::NotADistribution(msg) => write!(f, "not a distribution: {msg}"),
            Error::SearchFailed(msg) => write!(f, "search failed: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
