use std::process::ExitCode;

use serde_json::json;
use thiserror::Error;

/// Failures surfaced by the command-line tool, each with a fixed exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration: `key` is the dotted path of the offending entry (empty for the
    /// whole document).
    #[error("config error at `{key}`: {message}")]
    Config {
        key: String,
        message: String,
        suggestion: Option<String>,
    },
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Core(#[from] otdf_core::Error),
}

impl CliError {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.to_string(),
            message: message.into(),
            suggestion: None,
        }
    }

    pub fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    /// 2 configuration, 3 numerical or i/o, 4 statistics.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Core(otdf_core::Error::InvalidParameter { .. }) => 2,
            CliError::Core(e) if e.is_statistics() => 4,
            _ => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match (self, self.exit_code()) {
            (CliError::Io { .. }, _) => "io",
            (_, 2) => "config",
            (_, 4) => "statistics",
            _ => "numeric",
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> String {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        if let CliError::Config { key, suggestion, .. } = self {
            v["key"] = json!(key);
            if let Some(s) = suggestion {
                v["suggestion"] = json!(s);
            }
        }
        v.to_string()
    }

    pub fn report(&self) -> ExitCode {
        eprintln!("{}", self.to_json());
        ExitCode::from(self.exit_code())
    }
}
