use std::path::Path;

use thiserror::Error;

/// Why a run failed, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad scenario, flag or environment: exit 2.
    #[error("{0}")]
    Validation(String),
    /// The computation itself failed: exit 3.
    #[error(transparent)]
    Numerical(hornatlas::Error),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }

    /// Short machine-readable reason.
    pub fn reason(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Numerical(e) => e.kind(),
            CliError::Io(_) => "io",
        }
    }
}

impl From<hornatlas::Error> for CliError {
    fn from(e: hornatlas::Error) -> Self {
        match e {
            // bad inputs that only the library could spot are still
            // validation failures
            hornatlas::Error::InvalidInput(msg) => CliError::Validation(msg),
            other => CliError::Numerical(other),
        }
    }
}
