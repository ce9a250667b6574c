use std::path::PathBuf;

/// Failure of a command, carrying the process exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Malformed or inconsistent input (exit code 2).
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] otpool_core::Error),
    /// The command ran but an internal validation failed (exit code 1).
    #[error("validation failed: {0}")]
    Validation(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Core(otpool_core::Error::Underflow { .. } | otpool_core::Error::NonFinite { .. }) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
