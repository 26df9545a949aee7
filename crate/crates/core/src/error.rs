use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Array or parameter dimensions disagree with what the consumer expects.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Argument outside its admissible domain (non-finite, out of range, empty).
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed file contents. `field` names the offending header entry or array.
    #[error("format error in {field}: {message}")]
    Format { field: String, message: String },

    /// A least-squares system does not have full rank on its support.
    #[error("rank deficient: {0}")]
    Rank(String),

    #[error("point is behind the camera (depth {depth} <= near {near})")]
    BehindCamera { depth: f64, near: f64 },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn format(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable category, used by the CLI error records and the C ABI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Domain(_) => "domain",
            Error::Format { .. } => "format",
            Error::Rank(_) => "rank",
            Error::BehindCamera { .. } => "domain",
            Error::Io { .. } | Error::Image { .. } => "io",
            Error::Json(_) => "format",
        }
    }
}
