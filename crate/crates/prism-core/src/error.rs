//! Crate-wide error type.

use thiserror::Error;

use crate::data::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("column {column:?} not found in header")]
    MissingColumn { column: String },
    #[error("non-numeric value {value:?} in column {column:?}, row {row}")]
    NonNumeric {
        column: String,
        row: usize,
        value: String,
    },
    #[error("missing value in column {column:?}, row {row}")]
    MissingValue { column: String, row: usize },
    #[error("treatment value {value} in row {row} is not 0 or 1")]
    NonBinaryTreatment { row: usize, value: f64 },
    #[error("treatment arm {arm} empty")]
    EmptyArm { arm: u8 },
    #[error("invalid dataset: {}", fmt_violations(violations))]
    InvalidDataset { violations: Vec<Violation> },
    #[error("invalid argument: {0}")]
    InvalidArg(String),
    #[error("subgroup {k} is empty")]
    EmptySubgroup { k: usize },
    #[error("subgroup rule matches no oracle patients")]
    EmptyOracleCell,
    #[error("numeric failure in {stage}: {message}")]
    Numeric { stage: String, message: String },
    #[error("bootstrap resample {b} still single-armed after {retries} redraws")]
    DegenerateResample { b: usize, retries: usize },
}

impl Error {
    pub fn numeric(stage: &str, message: impl Into<String>) -> Self {
        Error::Numeric {
            stage: stage.to_string(),
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input (as opposed to numeric failures).
    pub fn is_input(&self) -> bool {
        !matches!(
            self,
            Error::Numeric { .. } | Error::DegenerateResample { .. }
        )
    }
}

fn fmt_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
