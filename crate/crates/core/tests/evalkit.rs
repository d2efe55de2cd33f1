mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use sparca::cfselect::{cf_curve, default_grid};
use sparca::evalkit::logreg::{l1_logreg_fit, one_hot, smooth_loss, smooth_loss_grad};
use sparca::evalkit::synth::{gen_synthetic_factors, participation_ratio, SynthSpec};
use sparca::evalkit::{gen_blocks, gen_synthetic, noise_robustness, BlockSpec, NoiseScale, PcaModel, ScaledClassifier};
use sparca::{fit, DimReducer, HornParams, LabelVector};

fn classification_problem(seed: u64) -> (DMatrix<f64>, LabelVector) {
    let (n, p, k) = (80, 6, 3);
    let x = standardize(&gaussian(n, p, seed));
    let w = gaussian(p, k, seed + 77);
    let noise = gaussian(n, k, seed + 99);
    let scores = &x * &w + noise;
    let labels = scores
        .row_iter()
        .map(|r| r.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0)
        .collect();
    (x, LabelVector::new(labels))
}

#[test]
fn l1_solutions_satisfy_kkt_conditions() {
    for seed in 0..20u64 {
        let (x, y) = classification_problem(seed);
        let lambda = 10f64.powf(-3.0 + 2.0 * (seed as f64 / 19.0));
        let model = l1_logreg_fit(&x, &y, lambda).unwrap();
        assert!(model.converged, "seed {seed}");
        let targets = one_hot(&y, 3);
        let w = model.weights.transpose();
        let b = DVector::from_column_slice(&model.intercepts);
        let (_, gw, gb) = smooth_loss_grad(&x, &targets, &w, &b);
        for (g, wv) in gw.iter().zip(w.iter()) {
            if *wv == 0.0 {
                assert!(g.abs() <= lambda + 1e-4, "seed {seed}: zero weight with gradient {g}, lambda {lambda}");
            } else {
                assert!((g + lambda * wv.signum()).abs() <= 1e-4, "seed {seed}: stationarity {g} {wv}");
            }
        }
        assert!(gb.amax() <= 1e-4, "seed {seed}: intercept gradient {}", gb.amax());
    }
}

#[test]
fn smooth_gradient_matches_finite_differences() {
    for seed in 0..20u64 {
        let (x, y) = classification_problem(seed);
        let targets = one_hot(&y, 3);
        let w = gaussian(6, 3, seed + 5) * 0.3;
        let b = DVector::from_column_slice(gaussian(3, 1, seed + 6).as_slice());
        let (_, gw, gb) = smooth_loss_grad(&x, &targets, &w, &b);
        let h = 1e-6;
        for idx in 0..w.len() {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[idx] += h;
            wm[idx] -= h;
            let fd = (smooth_loss(&x, &targets, &wp, &b) - smooth_loss(&x, &targets, &wm, &b)) / (2.0 * h);
            assert!((fd - gw[idx]).abs() <= 1e-5 * gw[idx].abs().max(1e-2), "seed {seed}: {fd} vs {}", gw[idx]);
        }
        for idx in 0..3 {
            let (mut bp, mut bm) = (b.clone(), b.clone());
            bp[idx] += h;
            bm[idx] -= h;
            let fd = (smooth_loss(&x, &targets, &w, &bp) - smooth_loss(&x, &targets, &w, &bm)) / (2.0 * h);
            assert!((fd - gb[idx]).abs() <= 1e-5 * gb[idx].abs().max(1e-2));
        }
    }
}

#[test]
fn synthetic_effective_rank_hits_target() {
    let spec = SynthSpec { n_samples: 50, n_features: 100, effective_rank: 20.0, seed: 7 };
    let factors = gen_synthetic_factors(&spec).unwrap();
    let pr = participation_ratio(&factors.singular_values);
    assert!((19.0..=21.0).contains(&pr), "{pr}");
    assert!(factors.singular_values.windows(2).all(|w| w[0] >= w[1] && w[1] >= 0.0));
    let gram = factors.u.transpose() * &factors.u;
    assert!((gram - DMatrix::identity(factors.u.ncols(), factors.u.ncols())).amax() < 1e-10);
    let x = gen_synthetic(&spec).unwrap();
    assert_eq!(x, gen_synthetic(&spec).unwrap());
    // the spectrum of the generated matrix is the requested one
    let sv = x.values().clone().singular_values();
    let pr_x = participation_ratio(sv.as_slice());
    assert!((pr_x - pr).abs() < 1e-6 * pr);
}

#[test]
fn cf_curve_plateaus_at_the_planted_block_count() {
    let data = gen_blocks(&BlockSpec::eight_blocks(1)).unwrap();
    let grid = default_grid(80, 40);
    let curve = cf_curve(&data.x, &grid, &HornParams::with_seed(1)).unwrap();
    let at = |k: usize| curve.points.iter().find(|p| p.n_clusters == k).unwrap().n_features;
    assert_eq!(at(8), 8);
    assert_eq!(at(80), 80);
    let chosen = curve.points.iter().find(|p| p.n_clusters == curve.selected).unwrap();
    assert_eq!(chosen.n_features, 8);
}

#[test]
fn noise_sweep_is_clean_at_zero_and_chance_when_swamped() {
    let data = gen_blocks(&BlockSpec::eight_blocks(2)).unwrap();
    let y = LabelVector::new(sparca::evalkit::synth::factor_labels(&data.factors, 4));
    let model = fit(&data.x, 8, 0.95, HornParams::default()).unwrap();
    let pca = PcaModel::fit(&data.x, &HornParams::default()).unwrap();
    let clf_s = ScaledClassifier::fit(&model.transform_values(data.x.values()).unwrap(), &y, 1e-3).unwrap();
    let clf_p = ScaledClassifier::fit(&pca.transform_values(data.x.values()).unwrap(), &y, 1e-3).unwrap();
    let table = noise_robustness(&[&model, &pca], &[&clf_s, &clf_p], &data.x, &y, &[0.0, 100.0], NoiseScale::PerFeature, 0).unwrap();
    let clean_s = sparca::evalkit::accuracy(
        clf_s.predict(&model.transform_values(data.x.values()).unwrap()).unwrap().labels(),
        y.labels(),
    );
    assert_eq!(table.accuracy[0][0], clean_s);
    for acc in &table.accuracy[1] {
        assert!((acc - 0.25).abs() < 0.1, "{acc}");
    }
}

#[test]
fn reducers_share_the_dim_reducer_interface() {
    let data = gen_blocks(&BlockSpec::eight_blocks(4)).unwrap();
    let model = fit(&data.x, 8, 0.95, HornParams::default()).unwrap();
    let via_trait = model.transform_values(data.x.values()).unwrap();
    assert!((via_trait - model.transform(&data.x).unwrap().values).amax() < 1e-12);
    let pca = PcaModel::fit(&data.x, &HornParams::default()).unwrap();
    assert!((7..=9).contains(&pca.n_components()));
}
