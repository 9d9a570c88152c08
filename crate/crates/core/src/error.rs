use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SpsmError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SpsmError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("schema mismatch: {message} (columns: {})", columns.join(", "))]
    SchemaMismatch {
        message: String,
        columns: Vec<String>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no training pattern covers test mask {mask}")]
    Resolution { mask: String },

    #[error("fit failed at iteration {iteration}: {message}")]
    Fit { iteration: usize, message: String },

    #[error("oracle error: {0}")]
    Oracle(String),

    #[error("metric undefined: {0}")]
    Metric(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SpsmError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SpsmError::Io {
            path: path.into(),
            source,
        }
    }
}
