use thiserror::Error;

use crate::model::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("observation {y} under control {u} has zero probability given the belief")]
    ImpossibleObservation { u: usize, y: usize },

    #[error("index {value} out of range 1..={max}")]
    OutOfRange { value: usize, max: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid model: {0}")]
    InvalidModel(ValidationReport),

    #[error("invalid probability vector: {0}")]
    InvalidBelief(String),

    #[error("PWLC approximation needs at least one base point")]
    EmptyBasePoints,

    #[error("belief cost {0} is not supported here")]
    UnsupportedBeliefCost(String),

    #[error("no complete backup sweep finished within the {0} s time budget")]
    BudgetTooSmall(f64),

    #[error("exact belief tree exceeds the node cap of {0}")]
    TreeTooLarge(usize),

    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),

    #[error("unsupported grid {rows}x{cols}: quadrant goals need even dimensions")]
    UnsupportedGrid { rows: usize, cols: usize },

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
