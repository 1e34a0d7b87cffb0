// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const VALIDATION: u8 = 2;
    pub const IO: u8 = 3;
    pub const LLM: u8 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] routinecd::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{0}")]
    Usage(String),

    #[error("narrative required but unavailable for {0}")]
    LlmRequired(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_validation() => match e {
                routinecd::Error::Llm(_) => exit::LLM,
                _ => exit::IO,
            },
            CliError::Core(_) | CliError::Json { .. } | CliError::Usage(_) => exit::VALIDATION,
            CliError::Io { .. } => exit::IO,
            CliError::LlmRequired(_) => exit::LLM,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
