pub mod commands;
pub mod config;
pub mod dataset;

use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] singflow_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for invalid input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(_) => 3,
        }
    }

    pub fn to_json(&self) -> String {
        let kind = match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Core(e) => e.kind(),
        };
        json!({ "error": kind, "message": self.to_string(), "exit_code": self.exit_code() }).to_string()
    }
}
