use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::DataMatrix;
use crate::error::{Result, SparcaError};

/// Columns whose standard deviation falls below this are dropped.
pub const VARIANCE_EPS: f64 = 1e-12;

/// Per-feature centering and scaling statistics.
///
/// `means` and `stds` cover every input column; `kept_features` lists the
/// original column indices with non-negligible spread, in increasing order.
/// Standardized output only contains the kept columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub kept_features: Vec<usize>,
}

impl Scaler {
    /// Fits population (denominator `n`) means and standard deviations.
    pub fn fit(x: &DataMatrix) -> Result<Scaler> {
        let n = x.n_samples() as f64;
        let m = x.n_features();
        let mut means = Vec::with_capacity(m);
        let mut stds = Vec::with_capacity(m);
        for j in 0..m {
            let col = x.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            means.push(mean);
            stds.push(var.sqrt());
        }
        let kept_features: Vec<usize> = (0..m).filter(|&j| stds[j] >= VARIANCE_EPS).collect();
        if kept_features.is_empty() {
            return Err(SparcaError::NoUsableFeatures);
        }
        Ok(Scaler {
            means,
            stds,
            kept_features,
        })
    }

    /// Number of columns the scaler expects on input.
    pub fn n_input_features(&self) -> usize {
        self.means.len()
    }

    pub fn n_kept(&self) -> usize {
        self.kept_features.len()
    }

    /// Standardizes `x`, keeping only the retained columns.
    pub fn apply(&self, x: &DataMatrix) -> Result<DataMatrix> {
        DataMatrix::new(self.apply_values(x.values())?)
    }

    pub fn apply_values(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_width(x.ncols())?;
        let n = x.nrows();
        let mut out = Vec::with_capacity(n * self.n_kept());
        for &j in &self.kept_features {
            let (mean, std) = (self.means[j], self.stds[j]);
            out.extend(x.column(j).iter().map(|v| (v - mean) / std));
        }
        Ok(DMatrix::from_vec(n, self.n_kept(), out))
    }

    /// Standardizes a single raw column of original feature `feature`.
    pub fn standardize_column(&self, feature: usize, raw: &[f64]) -> Vec<f64> {
        let (mean, std) = (self.means[feature], self.stds[feature]);
        raw.iter().map(|v| (v - mean) / std).collect()
    }

    pub(crate) fn check_width(&self, got: usize) -> Result<()> {
        if got != self.n_input_features() {
            return Err(SparcaError::DimensionMismatch {
                what: "features",
                expected: self.n_input_features(),
                got,
            });
        }
        Ok(())
    }

    /// Checks the structural invariants; used when loading a serialized scaler.
    pub(crate) fn validate(&self) -> Result<()> {
        let m = self.means.len();
        if self.stds.len() != m {
            return Err(SparcaError::MalformedModel(
                "scaler means and stds differ in length".into(),
            ));
        }
        if self.kept_features.is_empty()
            || self.kept_features.windows(2).any(|w| w[0] >= w[1])
            || self.kept_features.last().is_some_and(|&j| j >= m)
        {
            return Err(SparcaError::MalformedModel(
                "scaler kept_features must be strictly increasing and in range".into(),
            ));
        }
        if self
            .kept_features
            .iter()
            .any(|&j| !(self.stds[j] >= VARIANCE_EPS) || !self.means[j].is_finite())
        {
            return Err(SparcaError::MalformedModel(
                "kept feature with non-positive spread".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn col_stats(x: &DataMatrix, j: usize) -> (f64, f64) {
        let c = x.column(j);
        let n = c.len() as f64;
        let mean = c.iter().sum::<f64>() / n;
        let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        (mean, var)
    }

    #[test]
    fn duplicated_column_statistics() {
        let x = DataMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]]).unwrap();
        let s = Scaler::fit(&x).unwrap();
        let expected_std = (2.0f64 / 3.0).sqrt();
        assert_eq!(s.means, vec![2.0, 2.0]);
        for sd in &s.stds {
            assert!((sd - expected_std).abs() < 1e-15);
        }
        assert_eq!(s.kept_features, vec![0, 1]);
    }

    #[test]
    fn constant_column_is_dropped() {
        let x = DataMatrix::from_rows(&[
            vec![1.0, 5.0, 0.5],
            vec![2.0, 5.0, 0.1],
            vec![4.0, 5.0, 0.9],
        ])
        .unwrap();
        let s = Scaler::fit(&x).unwrap();
        assert_eq!(s.kept_features, vec![0, 2]);
        assert_eq!(s.apply(&x).unwrap().n_features(), 2);
    }

    #[test]
    fn all_constant_is_an_error() {
        let x = DataMatrix::from_rows(&[vec![1.0, 5.0], vec![1.0, 5.0]]).unwrap();
        assert!(matches!(Scaler::fit(&x), Err(SparcaError::NoUsableFeatures)));
    }

    #[test]
    fn standardized_input_is_a_fixed_point() {
        let x = DataMatrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let s = Scaler::fit(&x).unwrap();
        for j in 0..2 {
            assert!(s.means[j].abs() < 1e-12);
            assert!((s.stds[j] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_then_apply_normalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..10).map(|j| rng.gen::<f64>() * (j as f64 + 1.0) + j as f64).collect())
            .collect();
        let x = DataMatrix::from_rows(&rows).unwrap();
        let s = Scaler::fit(&x).unwrap();
        let z = s.apply(&x).unwrap();
        for j in 0..z.n_features() {
            let (mean, var) = col_stats(&z, j);
            assert!(mean.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-8);
        }
        // a second application re-centres already-centred data with the old statistics
        let zz = s.apply(&z).unwrap();
        let direct: Vec<f64> = z
            .column(3)
            .iter()
            .map(|v| (v - s.means[3]) / s.stds[3])
            .collect();
        assert_eq!(zz.column(3), direct.as_slice());
        assert!(zz.column(3).iter().zip(z.column(3)).any(|(a, b)| (a - b).abs() > 1e-6));
    }

    #[test]
    fn apply_with_known_statistics() {
        let s = Scaler {
            means: vec![2.0],
            stds: vec![1.0],
            kept_features: vec![0],
        };
        let x = DataMatrix::from_rows(&[vec![2.0], vec![2.0]]).unwrap();
        assert_eq!(s.apply(&x).unwrap().column(0), &[0.0, 0.0]);
    }

    #[test]
    fn width_mismatch() {
        let x = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 5.0]]).unwrap();
        let s = Scaler::fit(&x).unwrap();
        let y = DataMatrix::from_rows(&[vec![1.0], vec![3.0]]).unwrap();
        assert!(matches!(
            s.apply(&y),
            Err(SparcaError::DimensionMismatch { expected: 2, got: 1, .. })
        ));
    }
}
