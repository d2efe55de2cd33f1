//! Synthetic data: low effective-rank matrices and noisy latent-factor blocks.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::data::DataMatrix;
use crate::error::{Result, SparcaError};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub n_samples: usize,
    pub n_features: usize,
    /// Target participation ratio of the singular spectrum.
    pub effective_rank: f64,
    pub seed: u64,
}

/// `(Σ s²)² / Σ s⁴`.
pub fn participation_ratio(singular_values: &[f64]) -> f64 {
    let s2: f64 = singular_values.iter().map(|s| s * s).sum();
    let s4: f64 = singular_values.iter().map(|s| s.powi(4)).sum();
    s2 * s2 / s4
}

fn half_normal(q: usize, width: f64) -> Vec<f64> {
    (0..q)
        .map(|i| (-0.5 * (i as f64 / width).powi(2)).exp())
        .collect()
}

/// Half-normal singular value profile `exp(-i² / 2w²)` of length `q` whose
/// participation ratio equals `effective_rank`.
pub fn spectrum(q: usize, effective_rank: f64) -> Result<Vec<f64>> {
    if q == 0 || !(effective_rank >= 1.0) || effective_rank > q as f64 {
        return Err(SparcaError::InvalidArgument(format!(
            "effective rank {effective_rank} infeasible for {q} singular values"
        )));
    }
    if effective_rank >= q as f64 - 1e-9 {
        return Ok(vec![1.0; q]);
    }
    // the ratio grows monotonically with the width
    let (mut lo, mut hi) = (1e-3f64.ln(), 1e7f64.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if participation_ratio(&half_normal(q, mid.exp())) < effective_rank {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(half_normal(q, (0.5 * (lo + hi)).exp()))
}

fn random_orthonormal(rows: usize, cols: usize, seed: u64, stream: u64) -> DMatrix<f64> {
    let mut rng = rng::stream(seed, &[stream]);
    let g = DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng));
    g.qr().q()
}

/// `U`, singular values and `V` of the generated matrix.
pub struct SynthFactors {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn gen_synthetic_factors(spec: &SynthSpec) -> Result<SynthFactors> {
    let q = spec.n_samples.min(spec.n_features);
    let singular_values = spectrum(q, spec.effective_rank)?;
    Ok(SynthFactors {
        u: random_orthonormal(spec.n_samples, q, spec.seed, 0),
        singular_values,
        v: random_orthonormal(spec.n_features, q, spec.seed, 1),
    })
}

/// `X = U diag(s) Vᵀ` with Haar-like random orthonormal factors.
pub fn gen_synthetic(spec: &SynthSpec) -> Result<DataMatrix> {
    let f = gen_synthetic_factors(spec)?;
    let mut us = f.u;
    for (j, s) in f.singular_values.iter().enumerate() {
        us.column_mut(j).scale_mut(*s);
    }
    DataMatrix::new(us * f.v.transpose())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSpec {
    pub n_blocks: usize,
    pub block_size: usize,
    pub n_samples: usize,
    /// Ratio of factor variance to noise variance in every column.
    pub snr: f64,
    pub seed: u64,
}

impl BlockSpec {
    /// Eight factors, ten copies each, 500 samples, SNR 5.
    pub fn eight_blocks(seed: u64) -> Self {
        Self {
            n_blocks: 8,
            block_size: 10,
            n_samples: 500,
            snr: 5.0,
            seed,
        }
    }
}

pub struct BlockData {
    pub x: DataMatrix,
    /// Generating block of every column.
    pub truth: Vec<usize>,
    /// `n x n_blocks` latent factors.
    pub factors: DMatrix<f64>,
}

/// Columns are independent Gaussian factors plus independent Gaussian noise;
/// block `b` occupies columns `b * block_size .. (b + 1) * block_size`.
pub fn gen_blocks(spec: &BlockSpec) -> Result<BlockData> {
    if spec.n_blocks == 0 || spec.block_size == 0 || spec.n_samples < 2 || !(spec.snr > 0.0) {
        return Err(SparcaError::InvalidArgument(format!("invalid block spec {spec:?}")));
    }
    let mut frng = rng::stream(spec.seed, &[0]);
    let factors = DMatrix::from_fn(spec.n_samples, spec.n_blocks, |_, _| {
        StandardNormal.sample(&mut frng)
    });
    let noise_sd = (1.0 / spec.snr).sqrt();
    let m = spec.n_blocks * spec.block_size;
    let mut nrng = rng::stream(spec.seed, &[1]);
    let x = DMatrix::from_fn(spec.n_samples, m, |i, j| {
        let e: f64 = StandardNormal.sample(&mut nrng);
        factors[(i, j / spec.block_size)] + noise_sd * e
    });
    Ok(BlockData {
        x: DataMatrix::new(x)?,
        truth: (0..m).map(|j| j / spec.block_size).collect(),
        factors,
    })
}

/// Class label = index of the largest of the first `n_classes` factors.
pub fn factor_labels(factors: &DMatrix<f64>, n_classes: usize) -> Vec<usize> {
    let k = n_classes.min(factors.ncols());
    factors
        .row_iter()
        .map(|row| {
            (0..k)
                .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                .unwrap_or(0)
        })
        .collect()
}
