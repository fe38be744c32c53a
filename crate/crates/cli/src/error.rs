use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failure of a CLI command, mapped onto the process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{message}")]
    Blowup { time: f64, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Blowup { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }

    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }
}

impl From<metasim_core::Error> for CliError {
    fn from(e: metasim_core::Error) -> Self {
        match e {
            metasim_core::Error::Blowup { time } => CliError::Blowup {
                time,
                message: e.to_string(),
            },
            other => CliError::Config(other.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
