use std::path::PathBuf;

use thiserror::Error;

use crate::tensor::TensorError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("compatibility error: {0}")]
    Compatibility(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("sample size error: need at least {needed} points, got {got}")]
    SampleSize { needed: usize, got: usize },
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse classification used to map failures onto CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Usage,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Compatibility(_) => ErrorKind::Config,
            Error::Usage(_) => ErrorKind::Usage,
            Error::Data(_) | Error::Io { .. } | Error::Degenerate(_) | Error::SampleSize { .. } => {
                ErrorKind::Data
            }
            Error::Numeric(_) => ErrorKind::Numeric,
            Error::Tensor(e) => match e {
                TensorError::NonFinite { .. } => ErrorKind::Numeric,
                _ => ErrorKind::Usage,
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
