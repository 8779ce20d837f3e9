use thiserror::Error;

/// Failures grouped by process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid flags or configuration document.
    #[error("configuration error: {0}")]
    Config(String),
    /// Numerical failure during a run.
    #[error("computation failed: {0}")]
    Compute(#[source] graphgrow_core::Error),
    /// Unreadable or unwritable files.
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub const CONFIG_EXIT: u8 = 2;
    pub const COMPUTE_EXIT: u8 = 3;
    pub const IO_EXIT: u8 = 4;

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => Self::CONFIG_EXIT,
            CliError::Compute(_) => Self::COMPUTE_EXIT,
            CliError::Io(_) => Self::IO_EXIT,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl From<graphgrow_core::Error> for CliError {
    fn from(e: graphgrow_core::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else if e.is_compute() {
            CliError::Compute(e)
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
