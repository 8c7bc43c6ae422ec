use std::io;

use thiserror::Error;

/// Problems found while reading a dataset file. Row numbers are 1-based
/// sample rows (header and label lines are not counted).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("row arity mismatch at row {row}: expected {expected} values, found {found}")]
    RowArity {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("unparseable value {token:?} at row {row}")]
    Parse { row: usize, token: String },
    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
    #[error("negative probability {value} at row {row}, label {label}")]
    NegativeProbability { row: usize, label: usize, value: f64 },
    #[error("distribution sum out of tolerance at row {row} (sum = {sum})")]
    DistributionSum { row: usize, sum: f64 },
    #[error("dataset is empty")]
    Empty,
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(
        "configuration error: tree depth {depth} needs {required} output units, \
         but output_units = {output_units}"
    )]
    DepthConstraint {
        depth: usize,
        required: usize,
        output_units: usize,
    },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid label distribution: {0}")]
    InvalidDistribution(String),

    #[error(transparent)]
    Data(#[from] DataError),

    #[error("model format error: {0}")]
    Model(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 configuration, 3 data format,
    /// 4 numeric failure, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::DepthConstraint { .. } => 2,
            Error::Data(_)
            | Error::Model(_)
            | Error::Json(_)
            | Error::Dimension { .. }
            | Error::InvalidDistribution(_) => 3,
            Error::Numeric(_) => 4,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
