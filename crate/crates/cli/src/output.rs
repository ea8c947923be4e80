//! Result envelopes, artifacts and the error type of the runner.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::args::ExperimentConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed experiment config.
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Op(#[from] onephase::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config-parse",
            CliError::Op(e) => e.kind(),
            CliError::Io { .. } => "io-error",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

/// A file produced by a command, relative to its output directory.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    pub fn new(name: impl Into<String>, contents: impl Into<String>) -> Self {
        Artifact { name: name.into(), contents: contents.into() }
    }
}

/// Outcome of one command before it is wrapped and written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub result: Value,
    pub artifacts: Vec<Artifact>,
}

/// Lowercase hex SHA-256 of the canonical (serde) JSON of the config.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn envelope(config: &ExperimentConfig, result: Value) -> Value {
    json!({
        "tool": "onephase",
        "version": VERSION,
        "command": config.command.name(),
        "config_hash": config_hash(config),
        "config": config,
        "result": result,
    })
}

pub fn error_document(err: &CliError, config: Option<&ExperimentConfig>) -> Value {
    json!({
        "tool": "onephase",
        "version": VERSION,
        "config_hash": config.map(config_hash),
        "error": { "kind": err.kind(), "message": err.to_string() },
    })
}

pub fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

/// Writes `result.json` and the artifacts into `dir`.
pub fn write_all(dir: &Path, document: &Value, artifacts: &[Artifact]) -> CliResult<()> {
    let io_err = |path: &Path| {
        let path = path.display().to_string();
        move |source| CliError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let target = dir.join("result.json");
    fs::write(&target, pretty(document)).map_err(io_err(&target))?;
    for a in artifacts {
        let target = dir.join(&a.name);
        if let Some(parent) = target.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&target, &a.contents).map_err(io_err(&target))?;
    }
    Ok(())
}
