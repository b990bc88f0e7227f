use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failure of a command, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: flowweld::Error,
    },
    #[error(transparent)]
    Core(#[from] flowweld::Error),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn file(path: impl AsRef<Path>, source: impl Into<flowweld::Error>) -> Self {
        CliError::File {
            path: path.as_ref().to_path_buf(),
            source: source.into(),
        }
    }

    /// 1 verification failure, 2 input contract violation, 3 I/O error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Usage(_) => 2,
            CliError::File { source, .. } | CliError::Core(source) => match source {
                flowweld::Error::Io(_) | flowweld::Error::Format { .. } => 3,
                _ => 2,
            },
        }
    }
}
