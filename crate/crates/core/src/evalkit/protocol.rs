//! Embedding / training / test evaluation of a reducer against the PCA
//! baseline: fit the reducer on the embedding split, pick the L1 strength by
//! stratified k-fold cross-validation on the training split, score on the
//! test split.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use super::baseline::PcaModel;
use super::logreg::{l1_logreg_fit_with, ScaledClassifier, SolverOptions};
use super::metrics::accuracy;
use super::robustness::{noise_robustness, NoiseScale, NoiseTable};
use crate::cfselect::{cf_curve_with_window, default_grid, CfCurve};
use crate::data::{DataMatrix, LabelVector, Scaler};
use crate::error::{Result, SparcaError};
use crate::horn::HornParams;
use crate::pipeline::{fit, DimReducer, SparcaModel, DEFAULT_VARIANCE_THRESHOLD};
use crate::rng;

/// Nine log-spaced L1 strengths from `1e-3` to `1e1`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..9).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect()
}

/// Sample order that interleaves classes proportionally: any prefix holds
/// each class in (nearly) its overall share.
pub fn stratified_order(labels: &[usize], seed: u64) -> Vec<usize> {
    let n_classes = labels.iter().max().map_or(0, |&k| k + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    let mut keyed: Vec<(f64, usize, usize)> = Vec::with_capacity(labels.len());
    for (c, members) in by_class.iter_mut().enumerate() {
        members.shuffle(&mut rng::stream(seed, &[c as u64]));
        let len = members.len() as f64;
        for (r, &i) in members.iter().enumerate() {
            keyed.push(((r as f64 + 0.5) / len, c, i));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|k| k.2).collect()
}

/// Disjoint stratified subsets with the requested sizes.
pub fn stratified_split(labels: &[usize], counts: &[usize], seed: u64) -> Result<Vec<Vec<usize>>> {
    let total: usize = counts.iter().sum();
    if total > labels.len() {
        return Err(SparcaError::InvalidArgument(format!(
            "split sizes {counts:?} exceed {} samples",
            labels.len()
        )));
    }
    let order = stratified_order(labels, seed);
    let mut out = Vec::with_capacity(counts.len());
    let mut start = 0;
    for &c in counts {
        let mut idx = order[start..start + c].to_vec();
        idx.sort_unstable();
        out.push(idx);
        start += c;
    }
    Ok(out)
}

/// Converts split fractions (summing to at most 1) into sample counts.
pub fn fractions_to_counts(n: usize, fractions: &[f64]) -> Result<Vec<usize>> {
    let sum: f64 = fractions.iter().sum();
    if fractions.iter().any(|f| !(*f >= 0.0)) || sum > 1.0 + 1e-9 {
        return Err(SparcaError::InvalidArgument(format!(
            "split fractions {fractions:?} must be non-negative and sum to at most 1"
        )));
    }
    Ok(fractions.iter().map(|f| (f * n as f64).floor() as usize).collect())
}

/// Stratified fold membership for k-fold cross-validation.
pub fn stratified_folds(labels: &[usize], n_folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut folds = vec![Vec::new(); n_folds];
    for (pos, i) in stratified_order(labels, seed).into_iter().enumerate() {
        folds[pos % n_folds].push(i);
    }
    folds
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub lambdas: Vec<f64>,
    pub mean_accuracy: Vec<f64>,
    pub best_lambda: f64,
    pub best_accuracy: f64,
}

/// Mean validation accuracy for each lambda. Ties favour the larger lambda.
pub fn cross_validate_lambda(
    x: &DMatrix<f64>,
    y: &LabelVector,
    lambdas: &[f64],
    n_folds: usize,
    seed: u64,
) -> Result<CvResult> {
    if lambdas.is_empty() || n_folds < 2 {
        return Err(SparcaError::InvalidArgument(
            "cross-validation needs lambdas and at least 2 folds".into(),
        ));
    }
    let folds = stratified_folds(y.labels(), n_folds, seed);
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    // strongest penalty first so each fit warm-starts the next
    order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));
    let mut totals = vec![0.0; lambdas.len()];
    for (f, held_out) in folds.iter().enumerate() {
        let train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        let x_tr = x.select_rows(train.iter());
        let y_tr = y.select(&train);
        let scaler = Scaler::fit(&DataMatrix::new(x_tr.clone())?)?;
        let z_tr = scaler.apply_values(&x_tr)?;
        let z_va = scaler.apply_values(&x.select_rows(held_out.iter()))?;
        let y_va = y.select(held_out);
        let mut warm = None;
        for &li in &order {
            let model = l1_logreg_fit_with(&z_tr, &y_tr, lambdas[li], &SolverOptions::default(), warm.as_ref())?;
            totals[li] += accuracy(model.predict(&z_va).labels(), y_va.labels());
            warm = Some(model);
        }
    }
    let mean_accuracy: Vec<f64> = totals.iter().map(|t| t / n_folds as f64).collect();
    let mut best = order[0];
    for &li in &order[1..] {
        if mean_accuracy[li] > mean_accuracy[best] {
            best = li;
        }
    }
    Ok(CvResult {
        lambdas: lambdas.to_vec(),
        best_lambda: lambdas[best],
        best_accuracy: mean_accuracy[best],
        mean_accuracy,
    })
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// `None` selects the cluster count from the cluster-feature curve.
    pub n_clusters: Option<usize>,
    pub variance_threshold: f64,
    pub horn: HornParams,
    pub grid_points: usize,
    pub smoothing_window: usize,
    pub lambdas: Vec<f64>,
    pub n_folds: usize,
    pub sigmas: Vec<f64>,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_clusters: None,
            variance_threshold: DEFAULT_VARIANCE_THRESHOLD,
            horn: HornParams::default(),
            grid_points: crate::cfselect::DEFAULT_GRID_POINTS,
            smoothing_window: crate::cfselect::DEFAULT_SMOOTHING_WINDOW,
            lambdas: default_lambda_grid(),
            n_folds: 5,
            sigmas: vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelReport {
    pub name: &'static str,
    pub n_features: usize,
    pub lambda: f64,
    pub cv_accuracy: f64,
    pub test_accuracy: f64,
    pub fit_seconds: f64,
}

/// Index sets of the three-way split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub embed: Vec<usize>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn stratified(labels: &LabelVector, counts: [usize; 3], seed: u64) -> Result<Split> {
        let mut parts = stratified_split(labels.labels(), &counts, seed)?.into_iter();
        Ok(Split {
            embed: parts.next().unwrap(),
            train: parts.next().unwrap(),
            test: parts.next().unwrap(),
        })
    }
}

/// Everything fitted during an evaluation run.
pub struct EvalRun {
    pub sparca: SparcaModel,
    pub pca: PcaModel,
    pub sparca_classifier: ScaledClassifier,
    pub pca_classifier: ScaledClassifier,
    pub cf_curve: Option<CfCurve>,
    pub reports: [ModelReport; 2],
    pub x_test: DataMatrix,
    pub y_test: LabelVector,
}

impl EvalRun {
    /// Noise sweep over both models with a given noise seed.
    pub fn robustness(&self, sigmas: &[f64], scale: NoiseScale, seed: u64) -> Result<NoiseTable> {
        noise_robustness(
            &[&self.sparca as &dyn DimReducer, &self.pca],
            &[&self.sparca_classifier, &self.pca_classifier],
            &self.x_test,
            &self.y_test,
            sigmas,
            scale,
            seed,
        )
    }
}

fn train_and_score(
    name: &'static str,
    reducer: &dyn DimReducer,
    fit_seconds: f64,
    x_train: &DataMatrix,
    y_train: &LabelVector,
    x_test: &DataMatrix,
    y_test: &LabelVector,
    cfg: &EvalConfig,
) -> Result<(ScaledClassifier, ModelReport)> {
    let r_train = reducer.transform_values(x_train.values())?;
    let r_test = reducer.transform_values(x_test.values())?;
    let cv = cross_validate_lambda(&r_train, y_train, &cfg.lambdas, cfg.n_folds, cfg.seed)?;
    let clf = ScaledClassifier::fit(&r_train, y_train, cv.best_lambda)?;
    let test_accuracy = accuracy(clf.predict(&r_test)?.labels(), y_test.labels());
    Ok((
        clf,
        ModelReport {
            name,
            n_features: reducer.n_components(),
            lambda: cv.best_lambda,
            cv_accuracy: cv.best_accuracy,
            test_accuracy,
            fit_seconds,
        },
    ))
}

/// Runs the full protocol for the sparse model and the PCA baseline.
pub fn run_eval(x: &DataMatrix, y: &LabelVector, split: &Split, cfg: &EvalConfig) -> Result<EvalRun> {
    if y.len() != x.n_samples() {
        return Err(SparcaError::DimensionMismatch {
            what: "labels",
            expected: x.n_samples(),
            got: y.len(),
        });
    }
    let x_embed = x.select_rows(&split.embed)?;
    let x_train = x.select_rows(&split.train)?;
    let y_train = y.select(&split.train);
    let x_test = x.select_rows(&split.test)?;
    let y_test = y.select(&split.test);

    let started = Instant::now();
    let (n_clusters, cf_curve) = match cfg.n_clusters {
        Some(k) => (k, None),
        None => {
            let kept = Scaler::fit(&x_embed)?.n_kept();
            let grid = default_grid(kept, cfg.grid_points);
            let curve = cf_curve_with_window(&x_embed, &grid, &cfg.horn, cfg.smoothing_window)?;
            (curve.selected, Some(curve))
        }
    };
    let sparca = fit(&x_embed, n_clusters, cfg.variance_threshold, cfg.horn)?;
    let sparca_seconds = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let pca = PcaModel::fit(&x_embed, &cfg.horn)?;
    let pca_seconds = started.elapsed().as_secs_f64();

    let (sparca_classifier, sparca_report) = train_and_score(
        "sparca", &sparca, sparca_seconds, &x_train, &y_train, &x_test, &y_test, cfg,
    )?;
    let (pca_classifier, pca_report) =
        train_and_score("pca", &pca, pca_seconds, &x_train, &y_train, &x_test, &y_test, cfg)?;

    Ok(EvalRun {
        sparca,
        pca,
        sparca_classifier,
        pca_classifier,
        cf_curve,
        reports: [sparca_report, pca_report],
        x_test,
        y_test,
    })
}
