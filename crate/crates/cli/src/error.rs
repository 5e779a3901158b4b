use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Evolution(#[from] fatigue_damage::error::EvolutionError),
    #[error(transparent)]
    Rescale(#[from] fatigue_damage::error::RescaleError),
    #[error(transparent)]
    Oracle(#[from] fatigue_damage::error::OracleError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, err: impl ToString) -> Self {
        CliError::Io {
            path: path.into(),
            reason: err.to_string(),
        }
    }
}
