//! CSV ingestion and column mapping.
//!
//! Headers are required, every cell must parse as a finite decimal number
//! (missing-value markers such as `NA` are rejected), and mapped columns must
//! exist, be unambiguous, and be pairwise disjoint.

use std::path::Path;

use svycausal::{DesignMatrix, DesignMode, SurveySample};

use crate::CliError;

/// A parsed rectangular numeric table.
pub struct Dataset {
    pub columns: Vec<String>,
    /// Row-major cells; every row has `columns.len()` entries.
    pub rows: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    /// Index of a named column; ambiguous or missing names are config errors.
    pub fn column(&self, name: &str) -> Result<usize, CliError> {
        let matches: Vec<usize> =
            (0..self.columns.len()).filter(|&j| self.columns[j] == name).collect();
        match matches.len() {
            0 => Err(CliError::config(format!("column `{name}` not found in the input header"))),
            1 => Ok(matches[0]),
            k => Err(CliError::config(format!("column `{name}` appears {k} times in the header"))),
        }
    }

    pub fn values(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

/// Read a CSV file: header row required, decimal-point numerals only, no
/// missing values.
pub fn read_csv(path: &Path) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
    let columns: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_owned)
        .collect();
    if columns.is_empty() {
        return Err(CliError::parse(format!("{}: empty header row", path.display())));
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::parse(format!("{}: {e}", path.display())))?;
        if record.len() != columns.len() {
            return Err(CliError::parse(format!(
                "row {}: {} fields, header has {}",
                i + 1,
                record.len(),
                columns.len()
            )));
        }
        let mut row = Vec::with_capacity(columns.len());
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                CliError::parse(format!(
                    "row {}, column `{}`: `{cell}` is not a decimal number",
                    i + 1,
                    columns[j]
                ))
            })?;
            if !value.is_finite() {
                return Err(CliError::parse(format!(
                    "row {}, column `{}`: non-finite value `{cell}`",
                    i + 1,
                    columns[j]
                )));
            }
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::parse(format!("{}: no data rows", path.display())));
    }
    Ok(Dataset { columns, rows })
}

/// Resolve the column mapping and assemble a survey sample. `outcome` is
/// optional (the balance command has no use for it); when absent the outcome
/// vector is zero-filled.
pub fn build_sample(
    ds: &Dataset,
    treatment: &str,
    outcome: Option<&str>,
    weight: &str,
    covariates: &[String],
    design: DesignMode,
) -> Result<SurveySample, CliError> {
    let mut mapped: Vec<&str> = vec![treatment, weight];
    if let Some(y) = outcome {
        mapped.push(y);
    }
    mapped.extend(covariates.iter().map(String::as_str));
    for (a, name) in mapped.iter().enumerate() {
        if mapped[a + 1..].contains(name) {
            return Err(CliError::config(format!(
                "column `{name}` is mapped more than once; mapped columns must be disjoint"
            )));
        }
    }

    let z = ds.values(ds.column(treatment)?);
    let y = match outcome {
        Some(name) => ds.values(ds.column(name)?),
        None => vec![0.0; ds.n()],
    };
    let w = ds.values(ds.column(weight)?);
    let mut x_rows = vec![Vec::with_capacity(covariates.len()); ds.n()];
    for name in covariates {
        let j = ds.column(name)?;
        for (i, row) in ds.rows.iter().enumerate() {
            x_rows[i].push(row[j]);
        }
    }
    let x = DesignMatrix::from_rows(&x_rows, covariates.to_vec()).map_err(CliError::Lib)?;
    SurveySample::new(x, z, y, w, design).map_err(CliError::Lib)
}
