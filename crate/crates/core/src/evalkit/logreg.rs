//! One-vs-rest logistic regression with an L1 penalty on the weights.
//!
//! All `K` binary problems share the design matrix, so they are solved
//! jointly as one separable problem over a `p x K` weight matrix:
//!
//! ```text
//! minimize  Σ_k (1/n) Σ_i [log(1 + exp(s_ik)) - y_ik s_ik] + λ Σ |w_jk|
//!           s_ik = x_i · w_k + b_k
//! ```
//!
//! The solver is accelerated proximal gradient (soft-thresholding) with
//! backtracking; momentum is reset whenever a step would raise the
//! objective, so the objective never increases.

use nalgebra::{DMatrix, DVector};

use crate::data::LabelVector;
use crate::error::{Result, SparcaError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative objective decrease that triggers an optimality check.
    pub tol: f64,
    /// Largest tolerated violation of the L1 optimality conditions.
    pub kkt_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            kkt_tol: 1e-6,
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1LogRegModel {
    /// `K x p`.
    pub weights: DMatrix<f64>,
    pub intercepts: Vec<f64>,
    pub lambda: f64,
    pub n_iter: usize,
    pub converged: bool,
}

/// One-hot `n x K` targets.
pub fn one_hot(y: &LabelVector, n_classes: usize) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(y.len(), n_classes);
    for (i, &c) in y.labels().iter().enumerate() {
        t[(i, c)] = 1.0;
    }
    t
}

#[inline]
fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

fn linear_scores(x: &DMatrix<f64>, w: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let mut s = x * w;
    for (k, mut col) in s.column_iter_mut().enumerate() {
        col.add_scalar_mut(b[k]);
    }
    s
}

/// Smooth part of the objective. `w` is `p x K`, `targets` is `n x K`.
pub fn smooth_loss(x: &DMatrix<f64>, targets: &DMatrix<f64>, w: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let s = linear_scores(x, w, b);
    let n = x.nrows() as f64;
    s.iter()
        .zip(targets.iter())
        .map(|(&s, &y)| softplus(s) - y * s)
        .sum::<f64>()
        / n
}

/// Smooth loss with its gradient with respect to `w` (`p x K`) and `b`.
pub fn smooth_loss_grad(
    x: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    w: &DMatrix<f64>,
    b: &DVector<f64>,
) -> (f64, DMatrix<f64>, DVector<f64>) {
    let n = x.nrows() as f64;
    let mut s = linear_scores(x, w, b);
    let mut loss = 0.0;
    for (sv, &y) in s.iter_mut().zip(targets.iter()) {
        loss += softplus(*sv) - y * *sv;
        *sv = (sigmoid(*sv) - y) / n;
    }
    let gw = x.tr_mul(&s);
    let gb = DVector::from_iterator(s.ncols(), s.column_iter().map(|c| c.sum()));
    (loss / n, gw, gb)
}

fn l1(w: &DMatrix<f64>) -> f64 {
    w.iter().map(|v| v.abs()).sum()
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Full penalized objective for a fitted model.
pub fn objective(model: &L1LogRegModel, x: &DMatrix<f64>, y: &LabelVector) -> f64 {
    let targets = one_hot(y, model.intercepts.len());
    let w = model.weights.transpose();
    let b = DVector::from_column_slice(&model.intercepts);
    smooth_loss(x, &targets, &w, &b) + model.lambda * l1(&w)
}

/// Largest violation of the optimality conditions at `(w, b)`: zero weights
/// need `|g| <= lambda`, nonzero weights `g + lambda * sign(w) = 0`, and the
/// unpenalized intercepts a zero gradient.
pub fn kkt_violation(x: &DMatrix<f64>, targets: &DMatrix<f64>, w: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> f64 {
    let (_, gw, gb) = smooth_loss_grad(x, targets, w, b);
    let weights = gw.iter().zip(w.iter()).map(|(g, wv)| {
        if *wv == 0.0 {
            (g.abs() - lambda).max(0.0)
        } else {
            (g + lambda * wv.signum()).abs()
        }
    });
    weights.chain(gb.iter().map(|g| g.abs())).fold(0.0, f64::max)
}

pub fn l1_logreg_fit(x: &DMatrix<f64>, y: &LabelVector, lambda: f64) -> Result<L1LogRegModel> {
    l1_logreg_fit_with(x, y, lambda, &SolverOptions::default(), None)
}

/// Fits with explicit solver options, optionally warm-started from `init`.
pub fn l1_logreg_fit_with(
    x: &DMatrix<f64>,
    y: &LabelVector,
    lambda: f64,
    opts: &SolverOptions,
    init: Option<&L1LogRegModel>,
) -> Result<L1LogRegModel> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(SparcaError::DimensionMismatch {
            what: "labels",
            expected: n,
            got: y.len(),
        });
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(SparcaError::InvalidArgument(format!("lambda {lambda} must be >= 0")));
    }
    let k = y.n_classes();
    let mut counts = vec![0usize; k];
    y.labels().iter().for_each(|&c| counts[c] += 1);
    if k < 2 || counts.iter().any(|&c| c == 0) {
        return Err(SparcaError::InvalidArgument(format!(
            "need at least two classes, each with a sample; class counts {counts:?}"
        )));
    }
    let targets = one_hot(y, k);

    let (mut w, mut b) = match init {
        Some(m) if m.weights.shape() == (k, p) => (
            m.weights.transpose(),
            DVector::from_column_slice(&m.intercepts),
        ),
        _ => (DMatrix::zeros(p, k), DVector::zeros(k)),
    };
    let penalized = |loss: f64, w: &DMatrix<f64>| loss + lambda * l1(w);

    // Lipschitz upper bound of the smooth part over (w, b): 0.25 * trace of
    // the augmented Gram matrix / n; the backtracking step starts above it
    let frob = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let mut step = 4.0 / (0.25 * (frob + 1.0)).max(1e-12);
    // flat losses (separable data) would otherwise grow the step without bound
    let max_step = 1e6 * step;

    let mut f_x = penalized(smooth_loss(x, &targets, &w, &b), &w);
    let (mut yw, mut yb) = (w.clone(), b.clone());
    let mut theta = 1.0f64;
    let mut converged = false;
    let mut n_iter = 0;

    while n_iter < opts.max_iter {
        n_iter += 1;
        let (f_y, gw, gb) = smooth_loss_grad(x, &targets, &yw, &yb);
        step = (step * 1.25).min(max_step);
        let (zw, zb, f_z_smooth) = loop {
            let zw = DMatrix::from_fn(p, k, |i, j| {
                soft_threshold(yw[(i, j)] - step * gw[(i, j)], step * lambda)
            });
            let zb = &yb - &gb * step;
            let f_z = smooth_loss(x, &targets, &zw, &zb);
            let dw = &zw - &yw;
            let db = &zb - &yb;
            let lin = gw.dot(&dw) + gb.dot(&db);
            let quad = (dw.norm_squared() + db.norm_squared()) / (2.0 * step);
            if f_z.is_finite() && f_z <= f_y + lin + quad + 1e-15 * f_y.abs() || step < 1e-20 {
                break (zw, zb, f_z);
            }
            step *= 0.5;
        };
        let f_z = penalized(f_z_smooth, &zw);

        if f_z > f_x {
            if theta > 1.0 {
                // momentum overshot: restart from the current iterate
                theta = 1.0;
                yw.copy_from(&w);
                yb.copy_from(&b);
                continue;
            }
            // a plain proximal step failed to descend: rounding floor reached
            converged = kkt_violation(x, &targets, &w, &b, lambda) <= opts.kkt_tol;
            break;
        }

        let decrease = (f_x - f_z) / f_x.abs().max(f64::MIN_POSITIVE);
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        let beta = (theta - 1.0) / theta_next;
        yw = &zw + (&zw - &w) * beta;
        yb = &zb + (&zb - &b) * beta;
        theta = theta_next;
        w = zw;
        b = zb;
        f_x = f_z;
        if (decrease < opts.tol || n_iter % 10 == 0)
            && kkt_violation(x, &targets, &w, &b, lambda) <= opts.kkt_tol
        {
            converged = true;
            break;
        }
    }

    Ok(L1LogRegModel {
        weights: w.transpose(),
        intercepts: b.iter().copied().collect(),
        lambda,
        n_iter,
        converged,
    })
}

impl L1LogRegModel {
    pub fn n_classes(&self) -> usize {
        self.intercepts.len()
    }

    /// `n x K` one-vs-rest linear scores.
    pub fn scores(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let b = DVector::from_column_slice(&self.intercepts);
        linear_scores(x, &self.weights.transpose(), &b)
    }

    /// Highest-scoring class per row; ties go to the smaller class id.
    pub fn predict(&self, x: &DMatrix<f64>) -> LabelVector {
        let s = self.scores(x);
        LabelVector::new(
            s.row_iter()
                .map(|row| {
                    let mut best = 0;
                    for k in 1..row.len() {
                        if row[k] > row[best] {
                            best = k;
                        }
                    }
                    best
                })
                .collect(),
        )
    }
}

/// Logistic regression on standardized reduced features.
#[derive(Debug, Clone)]
pub struct ScaledClassifier {
    pub scaler: crate::data::Scaler,
    pub model: L1LogRegModel,
}

impl ScaledClassifier {
    pub fn fit(x: &DMatrix<f64>, y: &LabelVector, lambda: f64) -> Result<Self> {
        let scaler = crate::data::Scaler::fit(&crate::data::DataMatrix::new(x.clone())?)?;
        let z = scaler.apply_values(x)?;
        Ok(Self {
            model: l1_logreg_fit(&z, y, lambda)?,
            scaler,
        })
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<LabelVector> {
        Ok(self.model.predict(&self.scaler.apply_values(x)?))
    }
}
