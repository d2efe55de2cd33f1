mod common;

use common::*;
use nalgebra::DMatrix;
use sparca::compress::pca_fit;
use sparca::omp::{omp_fit, Pursuit};
use sparca::ward::{cut_to_k, feature_distances, ward_linkage};
use sparca::DataMatrix;

#[test]
fn nn_chain_matches_greedy_ward_at_every_cut() {
    for seed in 0..50u64 {
        let m = 2 + (seed as usize % 11);
        let n = 3 + (seed as usize % 5);
        let x = gaussian(n, m, 1000 + seed);
        let data = DataMatrix::new(x.clone()).unwrap();
        let linkage = ward_linkage(&feature_distances(&data).unwrap(), m).unwrap();
        let oracle = greedy_ward(&x);
        for k in 1..=m {
            let cut = cut_to_k(&linkage, k).unwrap();
            assert_eq!(canonical(&cut.labels), oracle.partitions[m - k], "seed {seed}, k {k}");
        }
        // merge height squared is twice the SSE increase
        let mut heights: Vec<f64> = linkage.merges.iter().map(|mg| mg.distance * mg.distance / 2.0).collect();
        heights.sort_by(f64::total_cmp);
        let mut inc = oracle.increases.clone();
        inc.sort_by(f64::total_cmp);
        for (h, o) in heights.iter().zip(&inc) {
            assert!((h - o).abs() <= 1e-9 * (1.0 + o.abs()), "seed {seed}: {h} vs {o}");
        }
    }
}

#[test]
fn omp_path_matches_naive_pursuit() {
    for seed in 0..30u64 {
        let (n, m) = (20, 3 + seed as usize % 8);
        let d = standardize(&gaussian(n, m, 2000 + seed));
        let t: Vec<f64> = standardize(&gaussian(n, 1, 3000 + seed)).column(0).iter().copied().collect();
        let dict = DataMatrix::new(d.clone()).unwrap();
        let mut p = Pursuit::new(&dict, &t).unwrap();
        let (path, residuals) = naive_omp(&d, &t, m);
        for (step, (&want, r)) in path.iter().zip(&residuals).enumerate() {
            let got = p.step().expect("atoms remain");
            assert_eq!(got, want, "seed {seed}, step {step}");
            for (a, b) in p.residual().iter().zip(r) {
                assert!((a - b).abs() < 1e-8, "seed {seed}, step {step}: {a} vs {b}");
            }
        }
        assert!(p.step().is_none());
    }
}

#[test]
fn omp_skips_collinear_atoms() {
    let base = standardize(&gaussian(15, 3, 5));
    // column 3 duplicates column 0
    let d = DMatrix::from_fn(15, 4, |i, j| base[(i, j % 3)]);
    let t: Vec<f64> = (0..15).map(|i| base[(i, 0)] + 0.5 * base[(i, 1)]).collect();
    let sol = omp_fit(&DataMatrix::new(d).unwrap(), &t, 1.0).unwrap();
    let used: Vec<usize> = sol.entries.iter().map(|e| e.0).collect();
    assert!(!(used.contains(&0) && used.contains(&3)));
    assert!(sol.evr > 1.0 - 1e-12);
}

#[test]
fn pca_matches_covariance_eigendecomposition() {
    for seed in 0..20u64 {
        let (n, m) = (30 + seed as usize, 2 + seed as usize % 9);
        let z = standardize(&gaussian(n, m, 4000 + seed));
        let cov = z.transpose() * &z / n as f64;
        let (values, vectors) = jacobi_eigen(&cov);
        let h = m.min(n - 1);
        let pca = pca_fit(&DataMatrix::new(z.clone()).unwrap(), h).unwrap();
        for k in 0..h {
            assert!((pca.eigenvalues[k] - values[k]).abs() < 1e-8, "seed {seed}");
            let v = vectors.column(k);
            let l = pca.loadings.column(k);
            let sign = if v.dot(&l) < 0.0 { -1.0 } else { 1.0 };
            assert!((l - v * sign).amax() < 1e-8, "seed {seed}, component {k}");
        }
    }
}
