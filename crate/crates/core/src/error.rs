use std::path::PathBuf;

use fleetplan_engine::EngineError;

use crate::domain::ValidationReport;

#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {message}")]
    Data {
        file: String,
        line: usize,
        message: String,
    },
    #[error("case validation failed:\n{0}")]
    Invalid(ValidationReport),
    #[error("config: {0}")]
    Config(String),
    #[error("model: {0}")]
    Model(String),
    #[error("solver: {0}")]
    Engine(#[from] EngineError),
    #[error("scenario infeasible: {0}")]
    Infeasible(String),
    #[error("oracle: {0}")]
    Oracle(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn data(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Self::Data {
            file: file.into(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
