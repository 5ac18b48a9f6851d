use std::path::Path;

use thiserror::Error;

/// CLI failure, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error(transparent)]
    Core(#[from] surfnoise_core::Error),

    #[error("validation failed: {}", .0.join(", "))]
    Validation(Vec<String>),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }

    /// 0 success, 1 validation failure, 2 physics or solver error,
    /// 3 capacity or configuration error.
    pub fn exit_code(&self) -> i32 {
        use surfnoise_core::Error as E;
        match self {
            CliError::Validation(_) => 1,
            CliError::Config(_) | CliError::Io { .. } => 3,
            CliError::Core(E::Capacity { .. } | E::InvalidParameters(_) | E::MissingPatch(_)) => 3,
            CliError::Core(_) => 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use surfnoise_core::Error as E;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Validation(vec!["x".into()]).exit_code(), 1);
        assert_eq!(CliError::from(E::InsufficientLevels { found: 1 }).exit_code(), 2);
        assert_eq!(CliError::from(E::Reducible { zero_modes: 2 }).exit_code(), 2);
        assert_eq!(CliError::from(E::Capacity { states: 6000, cap: 5000 }).exit_code(), 3);
        assert_eq!(CliError::from(E::MissingPatch(4)).exit_code(), 3);
        assert_eq!(CliError::Config("x".into()).exit_code(), 3);
    }
}
