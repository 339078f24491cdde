use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by map training, evaluation and data handling.
#[derive(Debug, Error)]
pub enum SomError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("tanimoto distance requires boolean vectors, component {index} is {value}")]
    NonBoolean { index: usize, value: f64 },

    #[error("mahalanobis distance requires an inverse covariance matrix")]
    MissingCovariance,

    #[error("inverse covariance must be {expected}x{expected}, got {rows}x{cols}")]
    CovarianceShape {
        expected: usize,
        rows: usize,
        cols: usize,
    },

    #[error("covariance matrix is singular")]
    SingularCovariance,

    #[error("iteration {t} outside schedule range [0, {t_max}]")]
    IterationOutOfRange { t: usize, t_max: usize },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset has no {0} labels")]
    MissingLabels(&'static str),

    #[error("target values are constant, R² is undefined")]
    ConstantTarget,

    #[error("class {0} has no true instances, average accuracy is undefined")]
    EmptyClass(String),

    #[error("chance agreement is 1, kappa is undefined")]
    DegenerateChance,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: non-finite value `{value}`")]
    NonFinite {
        row: usize,
        column: String,
        value: String,
    },

    #[error("model file: {0}")]
    Model(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl SomError {
    /// True for errors caused by bad parameters rather than bad data or I/O.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            SomError::InvalidConfig(_)
                | SomError::InvalidSchedule(_)
                | SomError::IterationOutOfRange { .. }
        )
    }
}

pub type Result<T, E = SomError> = std::result::Result<T, E>;
