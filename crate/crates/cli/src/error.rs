use std::path::{Path, PathBuf};

use crate::config::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] reactive_islands::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_owned(), source }
    }

    pub fn csv(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }

    pub fn json(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }

    /// 2 usage, 3 numerical failure, 4 data or format error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Core(reactive_islands::Error::InvalidParameter(_)) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) | CliError::Io { .. } | CliError::Data(_) => 4,
        }
    }
}
