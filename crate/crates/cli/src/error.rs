use std::fmt::Display;
use std::path::Path;
use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn config(path: &Path, err: impl Display) -> Self {
        CliError::Config(format!("{}: {err}", path.display()))
    }

    pub fn io(path: &Path, err: impl Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Io { .. } => ExitCode::from(3),
        }
    }
}
