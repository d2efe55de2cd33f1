//! Orthogonal matching pursuit over a cluster's standardized columns.
//!
//! The selected-atom block is kept as a thin QR factorization (`Q` columns
//! plus upper-triangular `R`) that grows one column per step, so each refit
//! is a Gram-Schmidt step followed by a triangular solve.

use crate::data::DataMatrix;
use crate::error::{Result, SparcaError};

/// Candidates whose component orthogonal to the selection is below this
/// fraction of their norm are treated as collinear and skipped.
pub const RANK_TOL: f64 = 1e-10;

/// Stepwise OMP state. Each [`Pursuit::step`] selects one atom and refits.
pub struct Pursuit<'a> {
    dict: &'a DataMatrix,
    target: &'a [f64],
    centered_norm2: f64,
    residual: Vec<f64>,
    selected: Vec<usize>,
    excluded: Vec<bool>,
    q: Vec<Vec<f64>>,
    /// Column-major upper triangle: `r[k]` holds the first `k + 1` entries of column `k`.
    r: Vec<Vec<f64>>,
    /// `Qᵀ target`.
    qt_target: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

impl<'a> Pursuit<'a> {
    pub fn new(dict: &'a DataMatrix, target: &'a [f64]) -> Result<Self> {
        let n = dict.n_samples();
        if target.len() != n {
            return Err(SparcaError::DimensionMismatch {
                what: "target samples",
                expected: n,
                got: target.len(),
            });
        }
        let mean = target.iter().sum::<f64>() / n as f64;
        let centered_norm2: f64 = target.iter().map(|t| (t - mean) * (t - mean)).sum();
        if target.iter().all(|&t| t == 0.0) || centered_norm2 == 0.0 {
            return Err(SparcaError::InvalidArgument(
                "OMP target has no variance".into(),
            ));
        }
        Ok(Self {
            dict,
            target,
            centered_norm2,
            residual: target.to_vec(),
            selected: Vec::new(),
            excluded: vec![false; dict.n_features()],
            q: Vec::new(),
            r: Vec::new(),
            qt_target: Vec::new(),
        })
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    /// Selected atoms in selection order.
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// Explained-variance ratio of the current fit.
    pub fn evr(&self) -> f64 {
        1.0 - dot(&self.residual, &self.residual) / self.centered_norm2
    }

    /// Least-squares coefficients of the target on the selected atoms,
    /// aligned with [`Pursuit::selected`].
    pub fn coefficients(&self) -> Vec<f64> {
        let k = self.selected.len();
        let mut w = self.qt_target.clone();
        for i in (0..k).rev() {
            let mut s = w[i];
            for j in i + 1..k {
                s -= self.r[j][i] * w[j];
            }
            w[i] = s / self.r[i][i];
        }
        w
    }

    /// Adds the atom most correlated with the residual. Returns `None` once
    /// no atom can extend the selection.
    pub fn step(&mut self) -> Option<usize> {
        loop {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.dict.n_features() {
                if self.excluded[j] {
                    continue;
                }
                let c = dot(self.dict.column(j), &self.residual).abs();
                if best.map_or(true, |(_, b)| c > b) {
                    best = Some((j, c));
                }
            }
            let (atom, corr) = best?;
            self.excluded[atom] = true;
            if corr == 0.0 {
                // the residual is orthogonal to every remaining atom
                return None;
            }
            if self.push_atom(atom) {
                return Some(atom);
            }
        }
    }

    fn push_atom(&mut self, atom: usize) -> bool {
        let a = self.dict.column(atom);
        let a_norm = dot(a, a).sqrt();
        let mut v = a.to_vec();
        let k = self.q.len();
        let mut coeffs = vec![0.0; k + 1];
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for (i, qi) in self.q.iter().enumerate() {
                let c = dot(qi, &v);
                coeffs[i] += c;
                axpy(-c, qi, &mut v);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if a_norm == 0.0 || norm <= RANK_TOL * a_norm {
            return false;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        coeffs[k] = norm;
        let proj = dot(&v, self.target);
        let res_proj = dot(&v, &self.residual);
        axpy(-res_proj, &v, &mut self.residual);
        self.q.push(v);
        self.r.push(coeffs);
        self.qt_target.push(proj);
        self.selected.push(atom);
        true
    }
}

/// Sparse least-squares approximation of one target vector.
#[derive(Debug, Clone, PartialEq)]
pub struct OmpSolution {
    /// `(local atom index, weight)` sorted by atom index.
    pub entries: Vec<(usize, f64)>,
    /// Atoms in the order they were selected.
    pub path: Vec<usize>,
    pub evr: f64,
    /// True when the selection ran out of atoms before reaching the threshold.
    pub exhausted: bool,
}

/// Greedy OMP until the explained-variance ratio reaches `f`.
pub fn omp_fit(dict: &DataMatrix, target: &[f64], f: f64) -> Result<OmpSolution> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(SparcaError::InvalidArgument(format!(
            "variance threshold {f} outside (0, 1]"
        )));
    }
    let mut p = Pursuit::new(dict, target)?;
    let mut exhausted = false;
    loop {
        if p.step().is_none() {
            exhausted = true;
            break;
        }
        if p.evr() >= f {
            break;
        }
    }
    if p.selected().is_empty() {
        return Err(SparcaError::InvalidArgument(
            "target is orthogonal to every dictionary atom".into(),
        ));
    }
    let w = p.coefficients();
    let mut entries: Vec<(usize, f64)> = p.selected().iter().copied().zip(w).collect();
    entries.sort_by_key(|e| e.0);
    Ok(OmpSolution {
        entries,
        path: p.selected().to_vec(),
        evr: p.evr().clamp(0.0, 1.0),
        exhausted,
    })
}
