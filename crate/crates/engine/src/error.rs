use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown solver backend `{0}` (expected one of: highs, clarabel)")]
    UnknownBackend(String),
    #[error("backend `{backend}` cannot solve this program: {reason}")]
    Unsupported { backend: &'static str, reason: String },
    #[error("backend `{backend}` failed: {message}")]
    Backend { backend: &'static str, message: String },
}

pub type Result<T> = std::result::Result<T, EngineError>;
