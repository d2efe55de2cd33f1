//! Wall-clock scaling of `fit` along the sample and feature axes.

use std::time::Instant;

use super::synth::{gen_synthetic, SynthSpec};
use crate::error::{Result, SparcaError};
use crate::horn::HornParams;
use crate::pipeline::{fit, DEFAULT_VARIANCE_THRESHOLD};
use crate::rng;

/// Feature count held fixed while the sample count varies.
pub const SAMPLE_AXIS_FEATURES: usize = 100;
/// Sample count held fixed while the feature count varies.
pub const FEATURE_AXIS_SAMPLES: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct AxisTiming {
    pub sizes: Vec<usize>,
    /// Median wall seconds per size.
    pub seconds: Vec<f64>,
    /// Least-squares slope of log(seconds) on log(size).
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeReport {
    pub sample_axis: AxisTiming,
    pub feature_axis: AxisTiming,
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn loglog_slope(sizes: &[usize], seconds: &[f64]) -> f64 {
    let x: Vec<f64> = sizes.iter().map(|&s| (s as f64).ln()).collect();
    let y: Vec<f64> = seconds.iter().map(|s| s.max(1e-9).ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn check_grid(name: &str, grid: &[usize]) -> Result<()> {
    let lo = grid.iter().copied().min().unwrap_or(0);
    let hi = grid.iter().copied().max().unwrap_or(0);
    if grid.len() < 4 || lo == 0 || hi < 8 * lo {
        return Err(SparcaError::InvalidArgument(format!(
            "{name} grid needs at least 4 sizes spanning 8x, got {grid:?}"
        )));
    }
    Ok(())
}

/// Median seconds for one `n x m` fit. The generator rank is `m / 5`, capped
/// at `min(n, m)`; the cluster count is twice the uncapped rank.
pub fn time_fit(n: usize, m: usize, repeats: usize, seed: u64) -> Result<f64> {
    let rank = (m / 5).max(1);
    let spec = SynthSpec {
        n_samples: n,
        n_features: m,
        effective_rank: rank.min(n.min(m)) as f64,
        seed: rng::derive_seed(seed, &[n as u64, m as u64]),
    };
    let x = gen_synthetic(&spec)?;
    let n_clusters = (2 * rank).min(m);
    let horn = HornParams::with_seed(seed);
    // untimed warm-up so allocator and cache state match across sizes
    std::hint::black_box(fit(&x, n_clusters, DEFAULT_VARIANCE_THRESHOLD, horn)?);
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let started = Instant::now();
        let model = fit(&x, n_clusters, DEFAULT_VARIANCE_THRESHOLD, horn)?;
        times.push(started.elapsed().as_secs_f64());
        std::hint::black_box(model);
    }
    Ok(median(&mut times))
}

fn time_axis(grid: &[usize], shape: impl Fn(usize) -> (usize, usize), repeats: usize, seed: u64) -> Result<AxisTiming> {
    let mut sizes = grid.to_vec();
    sizes.sort_unstable();
    let seconds = sizes
        .iter()
        .map(|&s| {
            let (n, m) = shape(s);
            time_fit(n, m, repeats, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AxisTiming {
        slope: loglog_slope(&sizes, &seconds),
        sizes,
        seconds,
    })
}

/// Times `fit` on synthetic low-rank data along both axes, single-threaded.
pub fn profile_runtime(
    sample_grid: &[usize],
    feature_grid: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<RuntimeReport> {
    check_grid("sample", sample_grid)?;
    check_grid("feature", feature_grid)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| SparcaError::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| {
        Ok(RuntimeReport {
            sample_axis: time_axis(sample_grid, |n| (n, SAMPLE_AXIS_FEATURES), repeats, seed)?,
            feature_axis: time_axis(feature_grid, |m| (FEATURE_AXIS_SAMPLES, m), repeats, seed)?,
        })
    })
}
