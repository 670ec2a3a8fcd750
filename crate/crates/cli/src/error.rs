use std::path::Path;

use serde_json::{json, Value};

/// Command failure with a machine-readable kind and context.
#[derive(Debug, thiserror::Error)]
#[error("{kind}: {message}")]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub context: Value,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
            context: Value::Null,
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("config", message)
    }

    pub fn format(path: &Path, message: impl Into<String>) -> Self {
        Self::new("format", message).with("path", path.display().to_string())
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::new("io", err.to_string()).with("path", path.display().to_string())
    }

    pub fn core(err: fim_core::Error) -> Self {
        Self::new("pipeline", err.to_string())
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        if !self.context.is_object() {
            self.context = json!({});
        }
        self.context[key] = value.into();
        self
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": { "kind": self.kind, "message": self.message, "context": self.context } })
    }
}

impl From<fim_core::Error> for CliError {
    fn from(err: fim_core::Error) -> Self {
        CliError::core(err)
    }
}

pub type CliResult<T> = Result<T, CliError>;
