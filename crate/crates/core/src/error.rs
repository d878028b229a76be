//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed CSV input; `row` is 1-based and counts the header as row 1.
    #[error("csv error at row {row}: {msg}")]
    Csv { row: usize, msg: String },

    /// Malformed model file; `line` is 1-based.
    #[error("model file error at line {line}: {msg}")]
    ModelFormat { line: usize, msg: String },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("training data contains a single binary class")]
    SingleClass,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Divergence { epoch: usize },

    /// A repetition could not produce a usable split after retrying.
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
}
