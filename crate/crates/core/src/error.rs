use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dataset is empty")]
    Empty,

    #[error("ragged row at line {line}: expected {expected} columns, found {found}")]
    Ragged {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("class {0} has no points")]
    EmptyClass(u32),

    #[error("class {label} has {count} point(s); at least {needed} required")]
    TooFewPoints {
        label: u32,
        count: usize,
        needed: usize,
    },

    #[error("unknown class label {0}")]
    UnknownClass(u32),

    #[error("hyperplane has zero normal vector")]
    DegeneratePlane,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("forgetting would remove every retained point of the {0} class")]
    ClassCollapse(&'static str),

    #[error("not a model file")]
    NotAModel,

    #[error("unsupported model format version {0}")]
    Version(u32),

    #[error("corrupt model file: {0}")]
    Corrupt(String),
}

pub type Result<T> = std::result::Result<T, Error>;
