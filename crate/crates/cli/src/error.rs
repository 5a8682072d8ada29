use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] schwarma::Error),

    #[error("{failed} of {total} invariants failed")]
    Validation { failed: usize, total: usize },

    #[error("thread pool: {0}")]
    Threads(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Io { .. } => "io",
            Self::Core(_) => "simulation",
            Self::Validation { .. } => "validation",
            Self::Threads(_) => "threads",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Validation { .. } => 3,
            _ => 1,
        }
    }
}
