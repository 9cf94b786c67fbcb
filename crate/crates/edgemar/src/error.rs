//! Application-level errors with a machine-readable JSON rendering.

use edgemar_core::Error as CoreError;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    /// A pipeline stage failed; names the stage so batch logs stay legible.
    #[error("{stage}: {err}")]
    Stage { stage: &'static str, err: CoreError },
    #[error("config {path}: {msg}")]
    Config { path: String, msg: String },
    #[error("{path}: {err}")]
    Io {
        path: String,
        #[source]
        err: std::io::Error,
    },
    /// Malformed content in an otherwise readable file.
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    /// Bad command-line usage (unknown scheme, unknown axis, missing flag).
    #[error("{0}")]
    Usage(String),
}

impl AppError {
    pub fn stage(name: &'static str) -> impl Fn(CoreError) -> AppError {
        move |err| AppError::Stage { stage: name, err }
    }

    pub fn io(path: &std::path::Path) -> impl Fn(std::io::Error) -> AppError + '_ {
        move |err| AppError::Io {
            path: path.display().to_string(),
            err,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Stage { .. } => "stage",
            AppError::Config { .. } => "config",
            AppError::Io { .. } => "io",
            AppError::Format { .. } => "format",
            AppError::Usage(_) => "usage",
        }
    }

    /// One-line JSON for stderr; scripts match on `kind`.
    pub fn to_json(&self) -> String {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } }).to_string()
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 2,
            _ => 1,
        }
    }
}
