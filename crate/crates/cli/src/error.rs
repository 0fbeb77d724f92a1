use std::path::PathBuf;

use eit_core::EitError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {message}")]
    Config { message: String },

    #[error("input {path}: {message}")]
    Input { path: PathBuf, message: String },

    #[error("{source}")]
    Core {
        #[from]
        source: EitError,
    },

    #[error("io {path}: {message}")]
    Io { path: PathBuf, message: String },

    #[error("check failed: {message}")]
    Check { message: String },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.into(), message: err.to_string() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Input { .. } => "input",
            CliError::Core { source } if source.is_numerical() => "numerical",
            CliError::Core { .. } => "input",
            CliError::Io { .. } => "io",
            CliError::Check { .. } => "check",
        }
    }

    /// 2 for bad configuration or input, 3 for numerical failures, 4 for a
    /// failed `--check`, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "config" | "input" => 2,
            "numerical" => 3,
            "check" => 4,
            _ => 1,
        }
    }

    /// One line of JSON for stderr.
    pub fn to_json_line(&self) -> String {
        serde_json::json!({"error": self.kind(), "exit_code": self.exit_code(), "message": self.to_string()}).to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config { message: "x".into() }.exit_code(), 2);
        assert_eq!(CliError::from(EitError::Conditioning { min_eigenvalue: 0.0 }).exit_code(), 3);
        assert_eq!(CliError::from(EitError::Dimension { expected: 1, found: 2 }).exit_code(), 2);
        assert_eq!(CliError::Check { message: "x".into() }.exit_code(), 4);
        assert_eq!(CliError::io("a", "b").exit_code(), 1);
    }

    #[test]
    fn error_line_is_single_line_json() {
        let line = CliError::Config { message: "bad\nkey".into() }.to_json_line();
        assert!(!line.contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["exit_code"], 2);
        assert_eq!(v["error"], "config");
    }
}
