use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix decomposition failed: {0}")]
    Decomposition(String),

    #[error("design is numerically singular: {0}")]
    Conditioning(String),

    #[error("improper posterior: {0}")]
    ImproperPosterior(String),

    #[error("non-finite value in series {series} at slice {slice}")]
    Numerical { series: usize, slice: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid label mask: {0}")]
    InvalidLabel(String),

    #[error(
        "series `{series}` has a gap at row {position}: expected t={expected}, found t={found}"
    )]
    Gap {
        series: String,
        position: usize,
        expected: u64,
        found: u64,
    },

    #[error("series of length {len} is shorter than the required {required}")]
    SeriesTooShort { len: usize, required: usize },

    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error("checksum mismatch in {0}")]
    Checksum(String),

    #[error("incompatible format version: file has {found}, this build reads {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt container: {0}")]
    Corrupt(String),

    #[error("chain {chain}: {inner}")]
    Chain { chain: u64, inner: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// The underlying error with any chain context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Chain { inner, .. } => inner.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
