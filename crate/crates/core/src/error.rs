use thiserror::Error;

use crate::forms::{AtomId, RegistryKey};

#[derive(Debug, Error)]
pub enum Error {
    #[error("re-entry key @{0} does not resolve in the registry")]
    UnresolvedReEntry(RegistryKey),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("atom {0} is not allocated")]
    UnknownAtom(AtomId),

    #[error("form syntax error at byte {offset}: {message}")]
    FormSyntax { offset: usize, message: String },

    #[error("csv row {row}, column {column}: {message}")]
    Csv {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("csv row {row}: expected {expected} columns, found {found}")]
    ColumnCount {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("label column {0} not found")]
    MissingLabelColumn(String),

    #[error("class {class:?} has {count} sample(s); stratified split needs at least 2")]
    ClassTooSmall { class: String, count: usize },

    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("unknown dataset {0:?}")]
    UnknownDataset(String),

    #[error("run log line {line}: {message}")]
    RunLog { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
