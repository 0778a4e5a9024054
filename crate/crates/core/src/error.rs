use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the imputation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error("malformed schema: {0}")]
    Schema(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("row {row}, column {column:?}: cannot parse {token:?} as a finite number")]
    NotNumeric {
        row: usize,
        column: String,
        token: String,
    },

    #[error("row {row}, column {column:?}: unknown level {label:?}")]
    UnknownLevel {
        row: usize,
        column: String,
        label: String,
    },

    #[error("column {0:?} has no observed values")]
    FullyMissing(String),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("degenerate bandwidth: {0}")]
    DegenerateBandwidth(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("incompatible configuration: {0}")]
    Incompatible(String),

    #[error("too few rows: need at least {needed}, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("degenerate missing rate {rate} for {rows} rows")]
    DegenerateRate { rate: f64, rows: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("degenerate Brunner-Munzel test: zero variance estimate (relative effect {relative_effect})")]
    DegenerateTest { relative_effect: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
