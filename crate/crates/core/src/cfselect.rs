//! Cluster-feature curves and automatic choice of the cluster count.
//!
//! For each candidate cluster count the reduced feature count is the sum of
//! the per-cluster Horn component counts. The curve rises quickly, flattens
//! into a plateau and then grows by one feature per extra cluster; the
//! selected count is the start of the plateau, located as the minimum of the
//! smoothed first derivative.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{DataMatrix, Scaler};
use crate::error::{Result, SparcaError};
use crate::horn::{horn_components, HornParams};
use crate::ward::{cut_to_k, feature_distances, ward_linkage, Linkage};

pub const DEFAULT_GRID_POINTS: usize = 40;
pub const DEFAULT_SMOOTHING_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CfPoint {
    pub n_clusters: usize,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CfCurve {
    pub points: Vec<CfPoint>,
    /// First derivative at every grid point (one-sided at the ends).
    pub derivative: Vec<f64>,
    pub selected: usize,
}

/// Geometric grid of up to `n_points` cluster counts from 2 to `m`, always
/// ending at `m`.
pub fn default_grid(m: usize, n_points: usize) -> Vec<usize> {
    if m <= 2 {
        return (1..=m).collect();
    }
    let n_points = n_points.max(2);
    let (lo, hi) = (2f64.ln(), (m as f64).ln());
    let mut grid: Vec<usize> = (0..n_points)
        .map(|i| (lo + (hi - lo) * i as f64 / (n_points - 1) as f64).exp().round() as usize)
        .map(|k| k.clamp(2, m))
        .collect();
    grid.push(m);
    grid.sort_unstable();
    grid.dedup();
    grid
}

/// Derivative of `y` over a possibly non-uniform grid `x`: central
/// differences inside, one-sided differences at both ends.
pub fn finite_difference(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| {
                let (a, b) = match i {
                    0 => (0, 1),
                    i if i == n - 1 => (n - 2, n - 1),
                    i => (i - 1, i + 1),
                };
                (y[b] - y[a]) / (x[b] - x[a])
            })
            .collect(),
    }
}

/// Centered moving average; the window shrinks at the ends.
pub fn moving_average(v: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let left = (window - 1) / 2;
    let right = window - 1 - left;
    (0..v.len())
        .map(|i| {
            let lo = i.saturating_sub(left);
            let hi = (i + right).min(v.len() - 1);
            v[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Grid value at the minimum of the smoothed derivative.
///
/// The final grid point is not a candidate: nothing follows it, so it can
/// never open a plateau. Ties go to the smallest cluster count.
pub fn select_clusters(curve: &CfCurve, smoothing_window: usize) -> Result<usize> {
    select_from_points(&curve.points, smoothing_window)
}

fn select_from_points(points: &[CfPoint], smoothing_window: usize) -> Result<usize> {
    if points.len() < 3 {
        return Err(SparcaError::InvalidArgument(format!(
            "cluster selection needs at least 3 grid points, got {}",
            points.len()
        )));
    }
    let (x, y) = xy(points);
    let smooth = moving_average(&finite_difference(&x, &y), smoothing_window);
    let candidates = &smooth[..smooth.len() - 1];
    let mut best = 0;
    for (i, &d) in candidates.iter().enumerate() {
        // tolerance keeps rounding noise from breaking exact plateau ties
        if d < candidates[best] - 1e-12 {
            best = i;
        }
    }
    Ok(points[best].n_clusters)
}

fn xy(points: &[CfPoint]) -> (Vec<f64>, Vec<f64>) {
    points
        .iter()
        .map(|p| (p.n_clusters as f64, p.n_features as f64))
        .unzip()
}

/// Reduced feature counts for every cluster count in `grid`, sharing one linkage.
pub fn cf_curve(x: &DataMatrix, grid: &[usize], horn: &HornParams) -> Result<CfCurve> {
    cf_curve_with_window(x, grid, horn, DEFAULT_SMOOTHING_WINDOW)
}

pub fn cf_curve_with_window(
    x: &DataMatrix,
    grid: &[usize],
    horn: &HornParams,
    smoothing_window: usize,
) -> Result<CfCurve> {
    horn.validate()?;
    let z = Scaler::fit(x)?.apply(x)?;
    let m = z.n_features();
    if grid.is_empty() {
        return Err(SparcaError::InvalidArgument("empty cluster grid".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] < 1 || grid[grid.len() - 1] > m {
        return Err(SparcaError::InvalidArgument(format!(
            "grid must be strictly increasing within 1..={m}"
        )));
    }
    let linkage = if m >= 2 {
        Some(ward_linkage(&feature_distances(&z)?, m)?)
    } else {
        None
    };
    let points: Vec<CfPoint> = grid
        .par_iter()
        .map(|&k| {
            Ok(CfPoint {
                n_clusters: k,
                n_features: features_at(&z, linkage.as_ref(), k, horn)?,
            })
        })
        .collect::<Result<_>>()?;
    let (gx, gy) = xy(&points);
    let derivative = finite_difference(&gx, &gy);
    let selected = if points.len() >= 3 {
        select_from_points(&points, smoothing_window)?
    } else {
        points[0].n_clusters
    };
    Ok(CfCurve {
        points,
        derivative,
        selected,
    })
}

fn features_at(z: &DataMatrix, linkage: Option<&Linkage>, k: usize, horn: &HornParams) -> Result<usize> {
    let Some(linkage) = linkage else {
        return Ok(1);
    };
    let assignment = cut_to_k(linkage, k)?;
    let counts: Vec<usize> = assignment
        .members()
        .par_iter()
        .map(|members| {
            if members.len() == 1 {
                return Ok(1);
            }
            horn_components(&z.select_columns(members)?, horn)
        })
        .collect::<Result<_>>()?;
    Ok(counts.iter().sum())
}
