//! End-to-end fitting: standardize, cluster features, compress each cluster
//! with PCA and sparsify every component with OMP.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compress::pca_fit;
use crate::data::{DataMatrix, Scaler};
use crate::error::{Result, SparcaError};
use crate::horn::{horn_components, HornParams};
use crate::omp::omp_fit;
use crate::ward::{cut_to_k, feature_distances, ward_linkage, ClusterAssignment};

pub const FORMAT_VERSION: u32 = 1;

/// Default minimum explained-variance ratio for each sparse component.
pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.95;

/// One column of the transformation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseComponent {
    pub cluster: usize,
    pub rank: usize,
    /// Explained-variance ratio of the PCA score reached on the fitting data.
    pub evr: f64,
    /// Set when every usable atom of the cluster was selected before the
    /// threshold was met.
    #[serde(default)]
    pub exhausted: bool,
    /// `(original feature index, weight)`, sorted by feature index.
    pub entries: Vec<(usize, f64)>,
}

impl SparseComponent {
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.0)
    }
}

/// Anything that maps standardized data onto a reduced feature space.
pub trait DimReducer: Sync {
    fn scaler(&self) -> &Scaler;

    fn n_components(&self) -> usize;

    /// `z` holds the scaler's kept columns, already standardized.
    fn transform_standardized(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>>;

    fn transform_values(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let z = self.scaler().apply_values(x)?;
        self.transform_standardized(&z)
    }
}

/// A fitted model: scaler, feature clusters and the sparse transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparcaModel {
    pub format_version: u32,
    pub library_version: String,
    pub n_clusters: usize,
    pub variance_threshold: f64,
    pub horn: HornParams,
    pub scaler: Scaler,
    /// Cluster id of each kept feature, aligned with `scaler.kept_features`.
    pub assignment: ClusterAssignment,
    /// Ordered by `(cluster, rank)`.
    pub components: Vec<SparseComponent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnProvenance {
    pub cluster: usize,
    pub rank: usize,
    pub support: Vec<usize>,
}

/// Reduced data together with where each column came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedMatrix {
    pub values: DMatrix<f64>,
    pub provenance: Vec<ColumnProvenance>,
}

fn compress_cluster(
    z: &DataMatrix,
    members: &[usize],
    kept: &[usize],
    cluster: usize,
    f: f64,
    horn: &HornParams,
) -> Result<Vec<SparseComponent>> {
    let block = z.select_columns(members)?;
    let h = horn_components(&block, horn)?;
    let pca = pca_fit(&block, h)?;
    (0..h)
        .map(|rank| {
            let score: Vec<f64> = pca.scores.column(rank).iter().copied().collect();
            let sol = omp_fit(&block, &score, f)?;
            Ok(SparseComponent {
                cluster,
                rank,
                evr: sol.evr,
                exhausted: sol.exhausted,
                entries: sol
                    .entries
                    .into_iter()
                    .map(|(local, w)| (kept[members[local]], w))
                    .collect(),
            })
        })
        .collect()
}

/// Fits a model with `n_clusters` feature clusters and variance threshold `f`.
pub fn fit(x: &DataMatrix, n_clusters: usize, f: f64, horn: HornParams) -> Result<SparcaModel> {
    horn.validate()?;
    if !(f > 0.0 && f <= 1.0) {
        return Err(SparcaError::InvalidArgument(format!(
            "variance threshold {f} outside (0, 1]"
        )));
    }
    let scaler = Scaler::fit(x)?;
    let z = scaler.apply(x)?;
    let m = z.n_features();
    if n_clusters < 1 || n_clusters > m {
        return Err(SparcaError::InvalidArgument(format!(
            "cluster count {n_clusters} outside 1..={m} (usable features)"
        )));
    }
    let assignment = if m == 1 {
        ClusterAssignment {
            labels: vec![0],
            n_clusters: 1,
        }
    } else {
        let linkage = ward_linkage(&feature_distances(&z)?, m)?;
        cut_to_k(&linkage, n_clusters)?
    };
    let members = assignment.members();
    let per_cluster: Vec<Vec<SparseComponent>> = members
        .par_iter()
        .enumerate()
        .map(|(c, mem)| compress_cluster(&z, mem, &scaler.kept_features, c, f, &horn))
        .collect::<Result<_>>()?;

    Ok(SparcaModel {
        format_version: FORMAT_VERSION,
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        n_clusters,
        variance_threshold: f,
        horn,
        scaler,
        assignment,
        components: per_cluster.into_iter().flatten().collect(),
    })
}

impl SparcaModel {
    /// Number of reduced features `p`.
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn n_input_features(&self) -> usize {
        self.scaler.n_input_features()
    }

    /// Dense `m x p` transformation matrix over the original features.
    pub fn gamma_dense(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.n_input_features(), self.n_components());
        for (j, comp) in self.components.iter().enumerate() {
            for &(i, w) in &comp.entries {
                g[(i, j)] = w;
            }
        }
        g
    }

    /// Components per cluster (`h_i`).
    pub fn components_per_cluster(&self) -> Vec<usize> {
        let mut h = vec![0; self.n_clusters];
        for c in &self.components {
            h[c.cluster] += 1;
        }
        h
    }

    pub fn provenance(&self) -> Vec<ColumnProvenance> {
        self.components
            .iter()
            .map(|c| ColumnProvenance {
                cluster: c.cluster,
                rank: c.rank,
                support: c.support().collect(),
            })
            .collect()
    }

    /// Standardizes `x` with the fitted statistics and applies the sparse transform.
    pub fn transform(&self, x: &DataMatrix) -> Result<ReducedMatrix> {
        self.scaler.check_width(x.n_features())?;
        let n = x.n_samples();
        let mut out = DMatrix::zeros(n, self.n_components());
        for (j, comp) in self.components.iter().enumerate() {
            let mut col = out.column_mut(j);
            for &(feature, w) in &comp.entries {
                let (mean, std) = (self.scaler.means[feature], self.scaler.stds[feature]);
                for (o, v) in col.iter_mut().zip(x.column(feature)) {
                    *o += w * ((v - mean) / std);
                }
            }
        }
        Ok(ReducedMatrix {
            values: out,
            provenance: self.provenance(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| SparcaError::MalformedModel(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<SparcaModel> {
        let probe: serde_json::Value =
            serde_json::from_str(text).map_err(|e| SparcaError::MalformedModel(e.to_string()))?;
        match probe.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(SparcaError::UnsupportedVersion {
                    found: u32::try_from(v).unwrap_or(u32::MAX),
                    expected: FORMAT_VERSION,
                })
            }
            None => {
                return Err(SparcaError::MalformedModel(
                    "missing format_version".into(),
                ))
            }
        }
        let model: SparcaModel = serde_json::from_value(probe)
            .map_err(|e| SparcaError::MalformedModel(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| SparcaError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SparcaModel> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| SparcaError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks the structural invariants of a model.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SparcaError::MalformedModel(msg));
        self.scaler.validate()?;
        self.horn.validate()?;
        if !(self.variance_threshold > 0.0 && self.variance_threshold <= 1.0) {
            return bad(format!("variance threshold {}", self.variance_threshold));
        }
        let kept = &self.scaler.kept_features;
        let a = &self.assignment;
        if a.labels.len() != kept.len() || a.n_clusters != self.n_clusters {
            return bad("assignment does not match kept features".into());
        }
        if a.labels.iter().any(|&c| c >= a.n_clusters) {
            return bad("cluster label out of range".into());
        }
        let m = self.n_input_features();
        let mut cluster_of = vec![usize::MAX; m];
        for (&feature, &c) in kept.iter().zip(&a.labels) {
            cluster_of[feature] = c;
        }
        let mut last = None;
        for comp in &self.components {
            let key = (comp.cluster, comp.rank);
            if last.is_some_and(|l| l >= key) {
                return bad("components not ordered by (cluster, rank)".into());
            }
            last = Some(key);
            if comp.entries.is_empty() || comp.entries.windows(2).any(|w| w[0].0 >= w[1].0) {
                return bad(format!("component {key:?} has unsorted or empty support"));
            }
            for &(feature, w) in &comp.entries {
                if feature >= m || cluster_of[feature] != comp.cluster || !w.is_finite() {
                    return bad(format!("component {key:?} uses feature {feature} outside its cluster"));
                }
            }
        }
        let h = self.components_per_cluster();
        if h.iter().any(|&c| c == 0) {
            return bad("every cluster must contribute a component".into());
        }
        Ok(())
    }
}

impl DimReducer for SparcaModel {
    fn scaler(&self) -> &Scaler {
        &self.scaler
    }

    fn n_components(&self) -> usize {
        self.components.len()
    }

    fn transform_standardized(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let kept = &self.scaler.kept_features;
        if z.ncols() != kept.len() {
            return Err(SparcaError::DimensionMismatch {
                what: "standardized features",
                expected: kept.len(),
                got: z.ncols(),
            });
        }
        let mut position = vec![usize::MAX; self.n_input_features()];
        for (p, &j) in kept.iter().enumerate() {
            position[j] = p;
        }
        let mut out = DMatrix::zeros(z.nrows(), self.components.len());
        for (j, comp) in self.components.iter().enumerate() {
            let mut col = out.column_mut(j);
            for &(feature, w) in &comp.entries {
                col.axpy(w, &z.column(position[feature]), 1.0);
            }
        }
        Ok(out)
    }
}
