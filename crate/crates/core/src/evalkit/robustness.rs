use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use super::logreg::ScaledClassifier;
use super::metrics::accuracy;
use crate::data::{DataMatrix, LabelVector};
use crate::error::{Result, SparcaError};
use crate::pipeline::DimReducer;
use crate::rng;

/// How `sigma` maps to per-feature noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseScale {
    /// i.i.d. noise on the raw test matrix with standard deviation `sigma * s`,
    /// where `s` is the root-mean-square feature standard deviation of the
    /// test set. Low-variance features receive proportionally more noise once
    /// standardized, as with pixel noise on an image.
    #[default]
    Pooled,
    /// Standard deviation `sigma` on every feature after standardization.
    PerFeature,
}

/// Test accuracy of every model at every noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTable {
    pub sigmas: Vec<f64>,
    /// `accuracy[s][j]`: model `j` at `sigmas[s]`.
    pub accuracy: Vec<Vec<f64>>,
}

/// Adds i.i.d. Gaussian noise at each level in `sigmas` to the test features
/// and scores each reducer/classifier pair.
///
/// At each noise level every model sees the same noise realization, drawn
/// per original feature so reducers with different kept sets stay paired.
pub fn noise_robustness(
    reducers: &[&dyn DimReducer],
    classifiers: &[&ScaledClassifier],
    x_test: &DataMatrix,
    y_test: &LabelVector,
    sigmas: &[f64],
    scale: NoiseScale,
    seed: u64,
) -> Result<NoiseTable> {
    if reducers.len() != classifiers.len() {
        return Err(SparcaError::InvalidArgument(format!(
            "{} reducers but {} classifiers",
            reducers.len(),
            classifiers.len()
        )));
    }
    if y_test.len() != x_test.n_samples() {
        return Err(SparcaError::DimensionMismatch {
            what: "test labels",
            expected: x_test.n_samples(),
            got: y_test.len(),
        });
    }
    let (n, m) = (x_test.n_samples(), x_test.n_features());
    let standardized: Vec<DMatrix<f64>> = reducers
        .iter()
        .map(|r| r.scaler().apply_values(x_test.values()))
        .collect::<Result<_>>()?;

    let pooled = {
        let sum: f64 = x_test.values().column_iter().map(|c| c.variance()).sum();
        (sum / m as f64).sqrt()
    };
    let mut table = Vec::with_capacity(sigmas.len());
    for (s, &sigma) in sigmas.iter().enumerate() {
        let mut g = rng::stream(seed, &[s as u64]);
        let noise = if sigma > 0.0 {
            Some(DMatrix::from_fn(n, m, |_, _| {
                sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut g)
            }))
        } else {
            None
        };
        let mut row = Vec::with_capacity(reducers.len());
        for ((reducer, clf), z) in reducers.iter().zip(classifiers).zip(&standardized) {
            let mut z = z.clone();
            if let Some(noise) = &noise {
                let scaler = reducer.scaler();
                for (p, &feature) in scaler.kept_features.iter().enumerate() {
                    let gain = match scale {
                        NoiseScale::PerFeature => 1.0,
                        NoiseScale::Pooled => pooled / scaler.stds[feature],
                    };
                    z.column_mut(p).axpy(gain, &noise.column(feature), 1.0);
                }
            }
            let reduced = reducer.transform_standardized(&z)?;
            let predicted = clf.predict(&reduced)?;
            row.push(accuracy(predicted.labels(), y_test.labels()));
        }
        table.push(row);
    }
    Ok(NoiseTable {
        sigmas: sigmas.to_vec(),
        accuracy: table,
    })
}
