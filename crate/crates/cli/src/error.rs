use std::path::Path;

use eseem_core::EseemError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("config error: field `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("input error in {path}: {reason}")]
    Input { path: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] EseemError),
    #[error("validation failed: {}", .0.join(", "))]
    ValidationFailed(Vec<String>),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn input(path: &Path, reason: impl Into<String>) -> Self {
        CliError::Input {
            path: path.display().to_string(),
            reason: reason.into(),
        }
    }

    /// 1 for failed validation checks, 2 for anything wrong with the inputs.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ValidationFailed(_) => 1,
            _ => 2,
        }
    }
}
