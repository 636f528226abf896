use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Usage(String),
    #[error("training diverged: {0}")]
    Divergence(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Error {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn parse(path: &Path, line: usize, message: impl ToString) -> Error {
        Error::Parse { path: path.to_path_buf(), line, message: message.to_string() }
    }

    /// Process exit status: 2 usage, 3 data or IO, 4 numeric divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::Io { .. } | Error::Parse { .. } | Error::Data(_) => 3,
            Error::Divergence(_) => 4,
        }
    }
}
