use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure reported by a completion, embedding, search or NLI backend.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited: {0}")]
    RateLimited(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("no scripted response for template `{template}` (digest {digest})")]
    NoTranscript { template: String, digest: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
}

impl ProviderError {
    /// Transport and rate-limit failures are worth retrying; auth and
    /// missing-transcript failures are not.
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::Transport(_) | ProviderError::RateLimited(_))
    }
}

/// Invariant violations, each tagged with the field path that broke.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationError {
    pub violations: Vec<(String, String)>,
}

impl ValidationError {
    pub fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push((path.into(), message.into()));
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn field_paths(&self) -> Vec<String> {
        self.violations.iter().map(|(p, _)| p.clone()).collect()
    }

    pub fn into_result(self) -> std::result::Result<(), ValidationError> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(self)
        }
    }
}

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} invariant violation(s)", self.violations.len())?;
        for (path, msg) in &self.violations {
            write!(f, "; {path}: {msg}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationError {}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("decomposition failed: {message}")]
    Decomposition { message: String, raw: String },
    #[error("could not parse classification answer: {raw:?}")]
    Classification { raw: String },
    #[error("could not parse stance answer: {raw:?}")]
    Stance { raw: String },
    #[error("edit failed: {0}")]
    Edit(String),
    #[error("strict mode: {0}")]
    Strict(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("workflow: {0}")]
    Workflow(#[from] crate::annotation::WorkflowError),
    #[error("checksum mismatch for {}", .file.display())]
    Checksum { file: PathBuf },
    #[error("adapter does not implement the `{0}` hook")]
    HookMissing(&'static str),
    #[error("config: {0}")]
    Config(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
