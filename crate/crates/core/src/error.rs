use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Error type shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Input lies outside a kernel's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller-side contract was violated.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Numerical failure inside an update or factorization.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Numeric failure with the fit iteration attached.
    #[error("fit iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    /// Malformed text input, positioned by line.
    #[error("{}:{line}: {message}", path.display())]
    ParseText {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// Malformed binary input, positioned by byte offset.
    #[error("{} at byte {offset}: {message}", path.display())]
    ParseBinary {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    /// File carries a version this reader does not support.
    #[error("{}: version mismatch: file has version {found}, reader supports {supported}", path.display())]
    Version {
        path: PathBuf,
        found: u32,
        supported: u32,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}
