use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed arguments: shape mismatches, out-of-range ids, non-finite values.
    #[error("input error: {0}")]
    Input(String),

    #[error("config error: {0}")]
    Config(String),

    /// Iterative solvers that failed to converge and similar numeric failures.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("{}:{line}: {message}", file.display())]
    Load {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("split error: {0}")]
    Split(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn load(file: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Load {
            file: file.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit code: 1 for internal/numeric failures, 2 for bad config or input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric(_) => 1,
            _ => 2,
        }
    }
}
