//! Per-cluster PCA via thin SVD.

use nalgebra::DMatrix;

use crate::data::DataMatrix;
use crate::error::{Result, SparcaError};

/// Top-`h` principal components of one centred feature block.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPca {
    /// `m_c x h`, orthonormal columns.
    pub loadings: DMatrix<f64>,
    /// `n x h`, `scores = x * loadings`.
    pub scores: DMatrix<f64>,
    /// Population variances of the score columns, descending.
    pub eigenvalues: Vec<f64>,
}

/// Flips `v` so that its largest-magnitude entry (first on ties) is positive.
pub fn normalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Fits `h` components of an already centred block.
pub fn pca_fit(x: &DataMatrix, h: usize) -> Result<ClusterPca> {
    let (n, m) = (x.n_samples(), x.n_features());
    let cap = n.saturating_sub(1).min(m);
    if h < 1 || h > cap {
        return Err(SparcaError::InvalidArgument(format!(
            "component count {h} outside 1..={cap} for a {n}x{m} block"
        )));
    }
    if x.values().iter().all(|&v| v == 0.0) {
        return Err(SparcaError::InvalidArgument(
            "cannot compress an all-zero block".into(),
        ));
    }

    let svd = x.values().clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors were requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut loadings = DMatrix::zeros(m, h);
    let mut eigenvalues = Vec::with_capacity(h);
    for (k, &idx) in order.iter().take(h).enumerate() {
        let mut v: Vec<f64> = v_t.row(idx).iter().copied().collect();
        normalize_sign(&mut v);
        loadings.set_column(k, &nalgebra::DVector::from_vec(v));
        let s = svd.singular_values[idx];
        eigenvalues.push(s * s / n as f64);
    }
    let scores = x.values() * &loadings;
    Ok(ClusterPca {
        loadings,
        scores,
        eigenvalues,
    })
}
