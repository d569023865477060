use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid run specification: {0}")]
    Validation(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Solver(#[from] rpqn::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;

impl BenchError {
    /// Process exit status: 2 for bad input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Validation(_) => 2,
            BenchError::Solver(rpqn::Error::InvalidParameter(_) | rpqn::Error::InvalidPartition(_)) => 2,
            BenchError::Solver(rpqn::Error::DimensionMismatch { .. }) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn validation(msg: impl Into<String>) -> BenchError {
    BenchError::Validation(msg.into())
}

pub(crate) trait IoContext<T> {
    fn at(self, path: &Path) -> Result<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|source| BenchError::Io { path: path.to_path_buf(), source })
    }
}
