//! Trial data model, validation, and CSV ingestion.
//!
//! A [`TrialDataset`] holds one row per patient: a single outcome, a binary
//! treatment indicator (0 = control, 1 = test), and a covariate table with a
//! per-column kind tag. Datasets are immutable after construction and safe to
//! share read-only across parallel workers. Missing data is rejected at
//! ingestion, never imputed.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};


#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutcomeFamily {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovariateKind {
    Continuous,
    Binary,
}

/// One invariant violation, with row/column context where applicable.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    LengthMismatch {
        field: String,
        expected: usize,
        actual: usize,
    },
    TooFewRows {
        n: usize,
    },
    TreatmentNotBinary {
        row: usize,
        value: f64,
    },
    EmptyArm {
        arm: u8,
    },
    NonFinite {
        column: String,
        row: usize,
    },
    BinaryKindViolation {
        column: String,
        row: usize,
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LengthMismatch {
                field,
                expected,
                actual,
            } => write!(f, "{field} has {actual} rows, expected {expected}"),
            Violation::TooFewRows { n } => write!(f, "dataset has {n} rows, need at least 2"),
            Violation::TreatmentNotBinary { row, value } => {
                write!(f, "treatment value {value} in row {row} is not 0 or 1")
            }
            Violation::EmptyArm { arm } => write!(f, "treatment arm {arm} empty"),
            Violation::NonFinite { column, row } => {
                write!(f, "missing or non-finite value in column {column:?}, row {row}")
            }
            Violation::BinaryKindViolation { column, row, value } => write!(
                f,
                "binary column {column:?} contains {value} in row {row}"
            ),
        }
    }
}

/// Outcomes, treatment indicators, and covariates for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    y: Vec<f64>,
    arm: Vec<u8>,
    columns: Vec<Vec<f64>>,
    kinds: Vec<CovariateKind>,
    names: Vec<String>,
}

impl TrialDataset {
    /// Build and validate. Covariate kinds are inferred: binary iff every
    /// value is 0 or 1.
    pub fn new(
        y: Vec<f64>,
        arm: Vec<u8>,
        columns: Vec<Vec<f64>>,
        names: Vec<String>,
    ) -> Result<Self> {
        let kinds = columns.iter().map(|c| infer_kind(c)).collect();
        Self::with_kinds(y, arm, columns, names, kinds)
    }

    /// Build with explicit kind tags (overrides inference).
    pub fn with_kinds(
        y: Vec<f64>,
        arm: Vec<u8>,
        columns: Vec<Vec<f64>>,
        names: Vec<String>,
        kinds: Vec<CovariateKind>,
    ) -> Result<Self> {
        let ds = Self::new_unchecked(y, arm, columns, names, kinds);
        let violations = ds.validate();
        if violations.is_empty() {
            Ok(ds)
        } else {
            Err(Error::InvalidDataset { violations })
        }
    }

    /// Build without validation. Only for ingestion internals and tests that
    /// need to exercise [`TrialDataset::validate`] on broken inputs.
    pub fn new_unchecked(
        y: Vec<f64>,
        arm: Vec<u8>,
        columns: Vec<Vec<f64>>,
        names: Vec<String>,
        kinds: Vec<CovariateKind>,
    ) -> Self {
        TrialDataset {
            y,
            arm,
            columns,
            kinds,
            names,
        }
    }

    /// Check every type invariant, returning all violations (not just the first).
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.y.len();
        if n < 2 {
            out.push(Violation::TooFewRows { n });
        }
        if self.arm.len() != n {
            out.push(Violation::LengthMismatch {
                field: "treatment".into(),
                expected: n,
                actual: self.arm.len(),
            });
        }
        for (j, col) in self.columns.iter().enumerate() {
            if col.len() != n {
                out.push(Violation::LengthMismatch {
                    field: format!("covariate {:?}", self.col_name(j)),
                    expected: n,
                    actual: col.len(),
                });
            }
        }
        if self.names.len() != self.columns.len() {
            out.push(Violation::LengthMismatch {
                field: "covariate names".into(),
                expected: self.columns.len(),
                actual: self.names.len(),
            });
        }
        if self.kinds.len() != self.columns.len() {
            out.push(Violation::LengthMismatch {
                field: "covariate kinds".into(),
                expected: self.columns.len(),
                actual: self.kinds.len(),
            });
        }
        for (i, &v) in self.y.iter().enumerate() {
            if !v.is_finite() {
                out.push(Violation::NonFinite {
                    column: "y".into(),
                    row: i,
                });
            }
        }
        let mut seen = [false, false];
        for (i, &a) in self.arm.iter().enumerate() {
            if a > 1 {
                out.push(Violation::TreatmentNotBinary {
                    row: i,
                    value: a as f64,
                });
            } else {
                seen[a as usize] = true;
            }
        }
        if !self.arm.is_empty() {
            for arm in [0u8, 1u8] {
                if !seen[arm as usize] {
                    out.push(Violation::EmptyArm { arm });
                }
            }
        }
        for (j, col) in self.columns.iter().enumerate() {
            let name = self.col_name(j);
            for (i, &v) in col.iter().enumerate() {
                if !v.is_finite() {
                    out.push(Violation::NonFinite {
                        column: name.clone(),
                        row: i,
                    });
                } else if self.kinds.get(j) == Some(&CovariateKind::Binary)
                    && v != 0.0
                    && v != 1.0
                {
                    out.push(Violation::BinaryKindViolation {
                        column: name.clone(),
                        row: i,
                        value: v,
                    });
                }
            }
        }
        out
    }

    fn col_name(&self, j: usize) -> String {
        self.names
            .get(j)
            .cloned()
            .unwrap_or_else(|| format!("column {j}"))
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.columns.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn arm(&self) -> &[u8] {
        &self.arm
    }

    pub fn covariate(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn kinds(&self) -> &[CovariateKind] {
        &self.kinds
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_in_arm(&self, arm: u8) -> usize {
        self.arm.iter().filter(|&&a| a == arm).count()
    }

    /// Row indices belonging to one arm.
    pub fn arm_rows(&self, arm: u8) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.arm[i] == arm).collect()
    }

    /// One covariate row as a dense vector (used by tree routing and rules).
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Row subset as a new dataset (bootstrap resampling; indices may repeat).
    pub fn subset(&self, rows: &[usize]) -> TrialDataset {
        TrialDataset {
            y: rows.iter().map(|&i| self.y[i]).collect(),
            arm: rows.iter().map(|&i| self.arm[i]).collect(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            kinds: self.kinds.clone(),
            names: self.names.clone(),
        }
    }
}

fn infer_kind(col: &[f64]) -> CovariateKind {
    if col.iter().all(|&v| v == 0.0 || v == 1.0) {
        CovariateKind::Binary
    } else {
        CovariateKind::Continuous
    }
}

/// Ordered subset of covariate columns retained by a filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilteredView {
    kept_columns: Vec<usize>,
}

impl FilteredView {
    pub fn new(kept_columns: Vec<usize>, n_covariates: usize) -> Result<Self> {
        let mut seen = vec![false; n_covariates];
        for &j in &kept_columns {
            if j >= n_covariates {
                return Err(Error::InvalidArg(format!(
                    "kept column {j} out of range (p = {n_covariates})"
                )));
            }
            if seen[j] {
                return Err(Error::InvalidArg(format!("kept column {j} duplicated")));
            }
            seen[j] = true;
        }
        Ok(FilteredView { kept_columns })
    }

    /// View keeping every covariate.
    pub fn all(n_covariates: usize) -> Self {
        FilteredView {
            kept_columns: (0..n_covariates).collect(),
        }
    }

    pub fn kept_columns(&self) -> &[usize] {
        &self.kept_columns
    }

    pub fn q(&self) -> usize {
        self.kept_columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept_columns.is_empty()
    }
}

/// Load a trial from CSV. All columns other than the outcome and treatment
/// become covariates, in file order.
pub fn load_csv(
    path: impl AsRef<Path>,
    outcome_col: &str,
    treatment_col: &str,
) -> Result<TrialDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.display().to_string(),
                source,
            },
            other => Error::InvalidArg(format!("csv error: {other:?}")),
        })?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::InvalidArg(format!("csv header error: {e}")))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();

    let outcome_idx = headers
        .iter()
        .position(|h| h == outcome_col)
        .ok_or_else(|| Error::MissingColumn {
            column: outcome_col.to_string(),
        })?;
    let treatment_idx = headers
        .iter()
        .position(|h| h == treatment_col)
        .ok_or_else(|| Error::MissingColumn {
            column: treatment_col.to_string(),
        })?;

    let covariate_idx: Vec<usize> = (0..headers.len())
        .filter(|&j| j != outcome_idx && j != treatment_idx)
        .collect();
    let names: Vec<String> = covariate_idx.iter().map(|&j| headers[j].clone()).collect();

    let mut y = Vec::new();
    let mut arm = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); covariate_idx.len()];

    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::InvalidArg(format!("csv row error: {e}")))?;
        let parse = |field_idx: usize, column: &str| -> Result<f64> {
            let raw = record.get(field_idx).unwrap_or("").trim();
            if raw.is_empty() {
                return Err(Error::MissingValue {
                    column: column.to_string(),
                    row: row_idx,
                });
            }
            let v: f64 = raw.parse().map_err(|_| Error::NonNumeric {
                column: column.to_string(),
                row: row_idx,
                value: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::MissingValue {
                    column: column.to_string(),
                    row: row_idx,
                });
            }
            Ok(v)
        };

        y.push(parse(outcome_idx, outcome_col)?);
        let a = parse(treatment_idx, treatment_col)?;
        if a != 0.0 && a != 1.0 {
            return Err(Error::NonBinaryTreatment {
                row: row_idx,
                value: a,
            });
        }
        arm.push(a as u8);
        for (slot, &j) in covariate_idx.iter().enumerate() {
            columns[slot].push(parse(j, &headers[j])?);
        }
    }

    for a in [0u8, 1u8] {
        if !arm.contains(&a) {
            return Err(Error::EmptyArm { arm: a });
        }
    }

    TrialDataset::new(y, arm, columns, names)
}

/// Write a dataset back to CSV (header `outcome,treatment,<covariates...>`).
/// Floats are printed as shortest round-trip decimals, so load/write/load is
/// lossless.
pub fn write_csv(
    ds: &TrialDataset,
    path: impl AsRef<Path>,
    outcome_col: &str,
    treatment_col: &str,
) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.display().to_string(),
            source,
        },
        other => Error::InvalidArg(format!("csv error: {other:?}")),
    })?;

    let mut header = vec![outcome_col.to_string(), treatment_col.to_string()];
    header.extend(ds.names().iter().cloned());
    writer
        .write_record(&header)
        .map_err(|e| Error::InvalidArg(format!("csv write error: {e}")))?;

    for i in 0..ds.n() {
        let mut record = vec![format!("{}", ds.y()[i]), format!("{}", ds.arm()[i])];
        for j in 0..ds.n_covariates() {
            record.push(format!("{}", ds.covariate(j)[i]));
        }
        writer
            .write_record(&record)
            .map_err(|e| Error::InvalidArg(format!("csv write error: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| Error::InvalidArg(format!("csv flush error: {e}")))?;
    Ok(())
}
