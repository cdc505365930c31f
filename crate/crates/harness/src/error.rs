use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("numeric guard: {0}")]
    Guard(String),
    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },
}

impl HarnessError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        Self::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    /// 2 config, 3 numeric guard, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => 2,
            Self::Guard(_) => 3,
            Self::Io { .. } => 4,
        }
    }
}
