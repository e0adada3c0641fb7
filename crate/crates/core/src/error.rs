use std::fmt;

use serde::{Deserialize, Serialize};

/// Errors produced by the PAINT pipeline and the interactive session.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("revision conflict: expected {expected}, session is at {actual}")]
    RevisionConflict { expected: u64, actual: u64 },

    #[error("empty outcome set")]
    EmptySet,

    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("degenerate point cloud (affine dimension {affine_dim} < {ambient_dim}); reduce the dimension first")]
    Degenerate { affine_dim: usize, ambient_dim: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no approximate outcome satisfies the classification bounds")]
    InfeasibleClassification,

    #[error("invalid classification: {}", join_violations(.0))]
    InvalidClassification(Vec<crate::nimbus::Violation>),

    #[error("input contains dominated outcomes (rows {0:?})")]
    Dominated(Vec<usize>),

    #[error("evaluator failure: {0}")]
    Evaluator(String),

    #[error("generation underflow: only {got} nondominated outcomes, need {needed}; increase the count")]
    GenerationUnderflow { got: usize, needed: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join_violations(v: &[crate::nimbus::Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Stable machine-readable error category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Parse,
    Data,
    Schema,
    Contract,
    NotFound,
    RevisionConflict,
    EmptySet,
    TooFewPoints,
    Degenerate,
    Numerical,
    InfeasibleClassification,
    InvalidClassification,
    Dominated,
    Evaluator,
    GenerationUnderflow,
    Io,
    Json,
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        let s = s.as_ref().and_then(|v| v.as_str()).unwrap_or("unknown");
        f.write_str(s)
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse { .. } => ErrorKind::Parse,
            Error::Data(_) => ErrorKind::Data,
            Error::Schema(_) => ErrorKind::Schema,
            Error::Contract(_) => ErrorKind::Contract,
            Error::NotFound(_) => ErrorKind::NotFound,
            Error::RevisionConflict { .. } => ErrorKind::RevisionConflict,
            Error::EmptySet => ErrorKind::EmptySet,
            Error::TooFewPoints { .. } => ErrorKind::TooFewPoints,
            Error::Degenerate { .. } => ErrorKind::Degenerate,
            Error::Numerical(_) => ErrorKind::Numerical,
            Error::InfeasibleClassification => ErrorKind::InfeasibleClassification,
            Error::InvalidClassification(_) => ErrorKind::InvalidClassification,
            Error::Dominated(_) => ErrorKind::Dominated,
            Error::Evaluator(_) => ErrorKind::Evaluator,
            Error::GenerationUnderflow { .. } => ErrorKind::GenerationUnderflow,
            Error::Io(_) => ErrorKind::Io,
            Error::Json(_) => ErrorKind::Json,
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            error: self.kind(),
            message: self.to_string(),
            violations: match self {
                Error::InvalidClassification(v) => Some(v.clone()),
                _ => None,
            },
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}

/// Machine-readable error body shared by the HTTP API and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub error: ErrorKind,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub violations: Option<Vec<crate::nimbus::Violation>>,
}

impl From<&Error> for ErrorReport {
    fn from(e: &Error) -> Self {
        e.report()
    }
}
