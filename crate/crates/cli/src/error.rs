use std::process::ExitCode;

use indet_core::IndetError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("{0}")]
    Core(#[from] IndetError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Core(e) if !e.is_validation() => ExitCode::from(3),
            _ => ExitCode::from(2),
        }
    }
}
