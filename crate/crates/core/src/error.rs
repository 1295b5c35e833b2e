use std::io;

use thiserror::Error;

/// Errors produced by dataset loading, matrix construction, the sweep and the
/// naive baseline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column:?}: {message}")]
    Parse {
        line: u64,
        column: String,
        message: String,
    },
    #[error("dataset has {0} rows, at least 2 required")]
    EmptyDataset(usize),
    #[error("dataset has {0} distinct class(es), at least 2 required")]
    SingleClass(usize),
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("non-finite feature value at row {row}, column {column}")]
    NonFiniteFeature { row: usize, column: usize },
    #[error("fold count {0} is invalid, at least 2 folds required")]
    BadFoldCount(usize),
    #[error("fold count {folds} exceeds number of rows {rows}")]
    TooManyFolds { folds: usize, rows: usize },
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("sorted matrix needs {required} bytes but the memory budget is {available} bytes")]
    MemoryBudgetExceeded { required: u64, available: u64 },
    #[error("fold assignment is inconsistent with the dataset: {0}")]
    InconsistentFolds(String),
    #[error("cannot classify from an empty neighborhood")]
    EmptyNeighborhood,
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
    #[error("k = {k} is out of range 1..={max}")]
    KTooLarge { k: usize, max: usize },
    #[error("malformed matrix dump: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
