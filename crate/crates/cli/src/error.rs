use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] levcool_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad input, 3 for numerical failure, 4 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(_) => 3,
            CliError::Io { .. } | CliError::Serialize(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            2 => "validation",
            3 => "integrator",
            _ => "io",
        }
    }

    /// Machine-readable one-line description for standard error.
    pub fn record(&self) -> serde_json::Value {
        json!({
            "error": {
                "kind": self.kind(),
                "exit_code": self.exit_code(),
                "message": self.to_string(),
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(CliError::config("x").exit_code(), 2);
        assert_eq!(CliError::Core(levcool_core::Error::MeasurementOff).exit_code(), 2);
        assert_eq!(
            CliError::Core(levcool_core::Error::IntegratorBlowup("nan".into())).exit_code(),
            3
        );
        let io = CliError::io("/x", std::io::Error::from(std::io::ErrorKind::PermissionDenied));
        assert_eq!(io.exit_code(), 4);
        assert_eq!(io.record()["error"]["kind"], "io");
    }
}
