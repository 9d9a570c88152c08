use spsm_core::SpsmError;

pub const INTERNAL: u8 = 1;
pub const INPUT: u8 = 2;
pub const RESOLUTION: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure {
            code: INPUT,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Failure {
            code: INTERNAL,
            message: message.into(),
        }
    }
}

impl From<SpsmError> for Failure {
    fn from(e: SpsmError) -> Self {
        let code = match &e {
            SpsmError::Io { .. }
            | SpsmError::Parse { .. }
            | SpsmError::Validation(_)
            | SpsmError::SchemaMismatch { .. }
            | SpsmError::Config(_)
            | SpsmError::Metric(_)
            | SpsmError::Oracle(_)
            | SpsmError::Json(_)
            | SpsmError::Csv(_) => INPUT,
            SpsmError::Resolution { .. } => RESOLUTION,
            SpsmError::Fit { .. } | SpsmError::Internal(_) => INTERNAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

/// Wrap a filesystem error with the path involved.
pub fn io(path: &std::path::Path, e: std::io::Error) -> Failure {
    Failure::input(format!("cannot access {}: {e}", path.display()))
}
