//! Independent reference implementations used by the integration tests.
//! Each one is deliberately naive so it shares no code path with the library.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn gaussian(n: usize, m: usize, seed: u64) -> DMatrix<f64> {
    let mut g = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut g))
}

/// Column-centred and unit-population-variance copy.
pub fn standardize(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mut z = x.clone();
    for mut col in z.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / n).sqrt();
        col /= sd;
    }
    z
}

fn centroid(x: &DMatrix<f64>, members: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; x.nrows()];
    for &j in members {
        for (ci, v) in c.iter_mut().zip(x.column(j).iter()) {
            *ci += v;
        }
    }
    c.iter_mut().for_each(|v| *v /= members.len() as f64);
    c
}

/// Sum of squared distances of member columns to their centroid.
pub fn cluster_sse(x: &DMatrix<f64>, members: &[usize]) -> f64 {
    let c = centroid(x, members);
    members
        .iter()
        .map(|&j| x.column(j).iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .sum()
}

/// Greedy Ward on raw columns: at each step merge the pair whose union
/// increases total within-cluster SSE the least, recomputed from scratch.
/// Returns the partition after every step (`partitions[t]` has `m - t`
/// clusters, each sorted, list sorted by first member) and the SSE increases.
pub struct GreedyWard {
    pub partitions: Vec<Vec<Vec<usize>>>,
    pub increases: Vec<f64>,
}

pub fn greedy_ward(x: &DMatrix<f64>) -> GreedyWard {
    let m = x.ncols();
    let mut clusters: Vec<Vec<usize>> = (0..m).map(|j| vec![j]).collect();
    let mut partitions = vec![clusters.clone()];
    let mut increases = Vec::new();
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for a in 0..clusters.len() {
            for b in a + 1..clusters.len() {
                let mut joint = clusters[a].clone();
                joint.extend(&clusters[b]);
                let delta = cluster_sse(x, &joint) - cluster_sse(x, &clusters[a]) - cluster_sse(x, &clusters[b]);
                if delta < best.0 {
                    best = (delta, a, b);
                }
            }
        }
        let (delta, a, b) = best;
        let moved = clusters.remove(b);
        clusters[a].extend(moved);
        clusters[a].sort_unstable();
        clusters.sort();
        increases.push(delta);
        partitions.push(clusters.clone());
    }
    GreedyWard { partitions, increases }
}

/// Least-squares fit of `t` on the columns `cols` of `d` via the normal
/// equations solved by Gaussian elimination; returns the residual.
pub fn lstsq_residual(d: &DMatrix<f64>, cols: &[usize], t: &[f64]) -> Vec<f64> {
    let k = cols.len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (r, &i) in cols.iter().enumerate() {
        for (c, &j) in cols.iter().enumerate() {
            a[r][c] = d.column(i).dot(&d.column(j));
        }
        a[r][k] = d.column(i).iter().zip(t).map(|(x, y)| x * y).sum();
    }
    for p in 0..k {
        let piv = (p..k).max_by(|&u, &v| a[u][p].abs().total_cmp(&a[v][p].abs())).unwrap();
        a.swap(p, piv);
        for r in 0..k {
            if r != p {
                let factor = a[r][p] / a[p][p];
                for c in p..=k {
                    a[r][c] -= factor * a[p][c];
                }
            }
        }
    }
    let coef: Vec<f64> = (0..k).map(|r| a[r][k] / a[r][r]).collect();
    let mut resid = t.to_vec();
    for (&j, c) in cols.iter().zip(&coef) {
        for (ri, v) in resid.iter_mut().zip(d.column(j).iter()) {
            *ri -= c * v;
        }
    }
    resid
}

/// Naive OMP: `steps` greedy selections, each followed by a fresh
/// least-squares solve. Returns the selected indices and residual after each step.
pub fn naive_omp(d: &DMatrix<f64>, t: &[f64], steps: usize) -> (Vec<usize>, Vec<Vec<f64>>) {
    let mut selected = Vec::new();
    let mut residuals = Vec::new();
    let mut r = t.to_vec();
    for _ in 0..steps {
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for j in 0..d.ncols() {
            if selected.contains(&j) {
                continue;
            }
            let c: f64 = d.column(j).iter().zip(&r).map(|(a, b)| a * b).sum::<f64>().abs();
            if c > best.0 {
                best = (c, j);
            }
        }
        selected.push(best.1);
        r = lstsq_residual(d, &selected, t);
        residuals.push(r.clone());
    }
    (selected, residuals)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenvalues come
/// back descending with matching unit eigenvector columns.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// Canonical form of a partition given as per-item labels.
pub fn canonical(labels: &[usize]) -> Vec<Vec<usize>> {
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, &l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort();
    out
}

/// Checks both the variance-recovery and the support contracts.
pub fn check_model_contracts(model: &sparca::SparcaModel, x: &sparca::DataMatrix) -> Result<(), String> {
    check_support_contract(model)?;
    check_variance_contract(model, x)
}

/// Cross-cluster supports are disjoint, `p` is the sum of per-cluster
/// component counts, and `p < m` whenever some cluster was compressed.
pub fn check_support_contract(model: &sparca::SparcaModel) -> Result<(), String> {
    let members = model.assignment.members();
    let h = model.components_per_cluster();
    if model.n_components() != h.iter().sum::<usize>() {
        return Err("p differs from the sum of per-cluster component counts".into());
    }
    let mut owner = vec![usize::MAX; model.n_input_features()];
    for comp in &model.components {
        for &(feature, _) in &comp.entries {
            if owner[feature] != usize::MAX && owner[feature] != comp.cluster {
                return Err(format!("feature {feature} used by clusters {} and {}", owner[feature], comp.cluster));
            }
            owner[feature] = comp.cluster;
        }
    }
    let compressed = members.iter().zip(&h).any(|(mem, &hc)| mem.len() > hc);
    if compressed && model.n_components() >= model.scaler.n_kept() {
        return Err("a cluster was compressed but p did not drop below m".into());
    }
    Ok(())
}

/// Every component recovers at least the variance threshold of its target
/// principal component, or is flagged as using the whole cluster. The
/// explained variance is recomputed from the model's own weights.
pub fn check_variance_contract(model: &sparca::SparcaModel, x: &sparca::DataMatrix) -> Result<(), String> {
    let z = model.scaler.apply(x).map_err(|e| e.to_string())?;
    let kept = &model.scaler.kept_features;
    let position = |feature: usize| kept.iter().position(|&k| k == feature).unwrap();
    let members = model.assignment.members();
    let h = model.components_per_cluster();
    let f = model.variance_threshold;
    let mut pcas = std::collections::HashMap::new();
    for comp in &model.components {
        if !(comp.evr >= f || comp.exhausted) {
            return Err(format!(
                "component ({}, {}) has evr {} < {f} without exhausting atoms",
                comp.cluster, comp.rank, comp.evr
            ));
        }
        let pca = pcas.entry(comp.cluster).or_insert_with(|| {
            let block = z.select_columns(&members[comp.cluster]).unwrap();
            sparca::compress::pca_fit(&block, h[comp.cluster]).unwrap()
        });
        let t = pca.scores.column(comp.rank);
        let mut approx = nalgebra::DVector::zeros(z.n_samples());
        for &(feature, w) in &comp.entries {
            approx += z.values().column(position(feature)) * w;
        }
        let evr = 1.0 - (t - approx).norm_squared() / t.norm_squared();
        if (evr - comp.evr).abs() > 1e-9 {
            return Err(format!("stored evr {} but recomputed {evr}", comp.evr));
        }
    }
    Ok(())
}
