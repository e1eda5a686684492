//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by every fallible operation in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible matrix/vector shapes; names both operands.
    #[error("dimension mismatch in {op}: left is {lhs_rows}x{lhs_cols}, right is {rhs_rows}x{rhs_cols}")]
    Dimension {
        op: &'static str,
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },

    /// A CSV cell could not be interpreted. Rows are 1-based data rows
    /// (the header is row 0).
    #[error("parse error at row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// The dataset does not match the declared schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// A stratified split cannot satisfy its guarantees.
    #[error("stratification error: {0}")]
    Stratification(String),

    /// Input outside an operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A required (utility class, sensitive class) cell has no members.
    #[error("empty subgroup cell (y={y}, s={s})")]
    EmptyCell { y: u8, s: usize },

    /// A computation produced NaN or infinity.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Invalid configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
