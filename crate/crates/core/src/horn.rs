//! Horn's parallel analysis for choosing how many principal components of a
//! feature block to keep.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Result, SparcaError};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HornParams {
    pub n_repeats: usize,
    /// Percentile of the null eigenvalue distribution used as threshold, in (0, 100].
    pub percentile: f64,
    pub seed: u64,
}

impl Default for HornParams {
    fn default() -> Self {
        Self {
            n_repeats: 20,
            percentile: 95.0,
            seed: 0,
        }
    }
}

impl HornParams {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_repeats < 1 {
            return Err(SparcaError::InvalidArgument("n_repeats must be at least 1".into()));
        }
        if !(self.percentile > 0.0 && self.percentile <= 100.0) {
            return Err(SparcaError::InvalidArgument(format!(
                "percentile {} outside (0, 100]",
                self.percentile
            )));
        }
        Ok(())
    }
}

/// Eigenvalues of the population covariance of `x`, descending.
///
/// Works on whichever of `XᵀX` and `XXᵀ` is smaller, so exactly
/// `min(n, m)` values are returned.
pub fn covariance_eigenvalues(x: &DMatrix<f64>) -> Vec<f64> {
    let n = x.nrows();
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
    }
    let gram = if x.ncols() <= n {
        centered.tr_mul(&centered)
    } else {
        &centered * centered.transpose()
    } / n as f64;
    let mut ev: Vec<f64> = gram.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// Linear-interpolated percentile of an ascending-sorted slice.
fn percentile_sorted(sorted: &[f64], pct: f64) -> f64 {
    let pos = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Null eigenvalue thresholds, one per rank, from row-permuted copies of `x`.
pub fn null_thresholds(x: &DMatrix<f64>, params: &HornParams) -> Vec<f64> {
    let (n, m) = x.shape();
    let trials: Vec<Vec<f64>> = (0..params.n_repeats)
        .into_par_iter()
        .map(|trial| {
            let mut shuffled = x.clone();
            for (c, col) in shuffled.as_mut_slice().chunks_mut(n).enumerate() {
                let mut rng = rng::stream(params.seed, &[trial as u64, c as u64]);
                col.shuffle(&mut rng);
            }
            covariance_eigenvalues(&shuffled)
        })
        .collect();
    let ranks = n.min(m);
    (0..ranks)
        .map(|r| {
            let mut at_rank: Vec<f64> = trials.iter().map(|t| t[r]).collect();
            at_rank.sort_by(f64::total_cmp);
            percentile_sorted(&at_rank, params.percentile)
        })
        .collect()
}

/// Length of the leading run of components whose observed eigenvalue beats
/// the permutation null at the same rank, clamped to `1..=min(n - 1, m_c)`.
///
/// Counting only the leading run keeps isolated chance exceedances at lower
/// ranks from inflating the count on pure noise.
pub fn horn_components(x: &DataMatrix, params: &HornParams) -> Result<usize> {
    params.validate()?;
    let (n, m) = (x.n_samples(), x.n_features());
    if n < 2 {
        return Err(SparcaError::InvalidArgument(format!(
            "parallel analysis needs at least 2 samples, got {n}"
        )));
    }
    let cap = (n - 1).min(m);
    if cap == 1 {
        return Ok(1);
    }
    let observed = covariance_eigenvalues(x.values());
    let thresholds = null_thresholds(x.values(), params);
    let raw = observed
        .iter()
        .zip(&thresholds)
        .take_while(|(l, t)| l > t)
        .count();
    Ok(raw.clamp(1, cap))
}
