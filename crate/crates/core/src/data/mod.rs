//! Tabular data carriers, standardization and dataset loaders.

mod io;
mod scaler;

pub use io::{load_csv, load_idx, write_csv};
pub use scaler::{Scaler, VARIANCE_EPS};

use nalgebra::DMatrix;

use crate::error::{Result, SparcaError};

/// Dense `n_samples x n_features` matrix of finite reals. Rows are samples.
///
/// Storage is column-major, so each feature column is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(SparcaError::InvalidArgument(format!(
                "data matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        let n = values.nrows();
        if let Some(pos) = values.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(SparcaError::NonFinite {
                row: pos % n,
                col: pos / n,
            });
        }
        Ok(Self { values })
    }

    /// Builds a matrix from row vectors; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
            return Err(SparcaError::InvalidArgument(format!(
                "row {i} has {} values, expected {m}",
                r.len()
            )));
        }
        Self::new(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n_samples();
        &self.values.as_slice()[j * n..(j + 1) * n]
    }

    /// Copies the listed columns, in order, into a new matrix.
    pub fn select_columns(&self, columns: &[usize]) -> Result<DataMatrix> {
        let n = self.n_samples();
        let mut data = Vec::with_capacity(n * columns.len());
        for &j in columns {
            if j >= self.n_features() {
                return Err(SparcaError::InvalidArgument(format!(
                    "column {j} out of range for {} features",
                    self.n_features()
                )));
            }
            data.extend_from_slice(self.column(j));
        }
        DataMatrix::new(DMatrix::from_vec(n, columns.len(), data))
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, rows: &[usize]) -> Result<DataMatrix> {
        if let Some(&bad) = rows.iter().find(|&&i| i >= self.n_samples()) {
            return Err(SparcaError::InvalidArgument(format!(
                "row {bad} out of range for {} samples",
                self.n_samples()
            )));
        }
        DataMatrix::new(self.values.select_rows(rows.iter()))
    }
}

/// Integer class labels `0..K-1`, one per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>) -> Self {
        Self { labels }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// One past the largest label present.
    pub fn n_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |&k| k + 1)
    }

    pub fn select(&self, rows: &[usize]) -> LabelVector {
        LabelVector::new(rows.iter().map(|&i| self.labels[i]).collect())
    }
}
