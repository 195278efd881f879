//! Validated design matrices for the regression fits.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// A column-labelled regression design with basic well-posedness guarantees:
/// at least as many rows as columns, all entries finite, and no all-zero column.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    data: DMatrix<f64>,
    names: Vec<String>,
}

impl DesignMatrix {
    /// Validate and wrap a raw matrix. `names` labels the columns.
    pub fn new(data: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Invalid("design matrix must be non-empty".into()));
        }
        if data.nrows() < data.ncols() {
            return Err(Error::Invalid(format!(
                "design matrix has more columns ({}) than rows ({})",
                data.ncols(),
                data.nrows()
            )));
        }
        if names.len() != data.ncols() {
            return Err(Error::Invalid(format!(
                "{} column names supplied for {} columns",
                names.len(),
                data.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("design matrix contains non-finite entries".into()));
        }
        for (j, name) in names.iter().enumerate() {
            if data.column(j).iter().all(|&v| v == 0.0) {
                return Err(Error::Invalid(format!("design column '{name}' is identically zero")));
            }
        }
        Ok(Self { data, names })
    }

    /// Build row-wise from per-unit slices.
    pub fn from_rows(rows: &[Vec<f64>], names: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Invalid("design matrix must be non-empty".into()));
        }
        let p = rows[0].len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::Invalid("ragged design rows".into()));
        }
        let data = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(data, names)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// One unit's design row as a plain vector.
    pub fn row_vec(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().copied().collect()
    }

    /// Value at (row, column).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    /// A new design keeping only the listed columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        for &c in columns {
            if c >= self.p() {
                return Err(Error::Invalid(format!(
                    "column index {c} out of range for {} columns",
                    self.p()
                )));
            }
        }
        let data = DMatrix::from_fn(self.n(), columns.len(), |i, j| self.data[(i, columns[j])]);
        let names = columns.iter().map(|&c| self.names[c].clone()).collect();
        Self::new(data, names)
    }

    /// A new design with extra columns appended on the right.
    pub fn with_appended(&self, column: &[f64], name: &str) -> Result<Self> {
        if column.len() != self.n() {
            return Err(Error::Invalid("appended column has wrong length".into()));
        }
        let mut data = DMatrix::zeros(self.n(), self.p() + 1);
        data.view_mut((0, 0), (self.n(), self.p())).copy_from(&self.data);
        for (i, &v) in column.iter().enumerate() {
            data[(i, self.p())] = v;
        }
        let mut names = self.names.clone();
        names.push(name.to_string());
        Self::new(data, names)
    }

    /// A new design with an intercept column of ones prepended.
    pub fn with_intercept(&self) -> Result<Self> {
        let mut data = DMatrix::zeros(self.n(), self.p() + 1);
        for i in 0..self.n() {
            data[(i, 0)] = 1.0;
        }
        data.view_mut((0, 1), (self.n(), self.p())).copy_from(&self.data);
        let mut names = vec!["(intercept)".to_string()];
        names.extend(self.names.iter().cloned());
        Self::new(data, names)
    }
}
