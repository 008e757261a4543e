use std::path::PathBuf;

use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },

    #[error("unknown key `{key}` (line {line})")]
    UnknownKey { key: String, line: usize },

    #[error("key `{key}` given more than once")]
    Duplicate { key: String },

    #[error("key `{key}`: `{value}` is not {expected}")]
    Type {
        key: String,
        value: String,
        expected: &'static str,
    },

    #[error("key `{key}` is required for mode {mode}")]
    Missing { key: String, mode: &'static str },

    #[error("key `{key}` = {value} violates {constraint}")]
    Range {
        key: String,
        value: String,
        constraint: String,
    },
}

impl ConfigError {
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Syntax { .. } => None,
            ConfigError::UnknownKey { key, .. }
            | ConfigError::Duplicate { key }
            | ConfigError::Type { key, .. }
            | ConfigError::Missing { key, .. }
            | ConfigError::Range { key, .. } => Some(key),
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Solver(#[from] tgge::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing artifacts: {}", .0.join(", "))]
    MissingArtifacts(Vec<String>),

    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Solver(_) => "solver",
            CliError::Io { .. } => "io",
            CliError::MissingArtifacts(_) => "missing_artifacts",
            CliError::Input { .. } => "input",
        }
    }

    /// Single-line JSON error record.
    pub fn to_record(&self) -> String {
        let mut rec = json!({ "error": self.kind(), "message": self.to_string() });
        if let CliError::Config(c) = self {
            if let Some(k) = c.key() {
                rec["key"] = json!(k);
            }
        }
        if let CliError::MissingArtifacts(files) = self {
            rec["files"] = json!(files);
        }
        rec.to_string()
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
