//! Ward agglomerative clustering of feature columns.
//!
//! The linkage is built with the nearest-neighbour-chain algorithm over a
//! materialized condensed distance matrix, using the Lance-Williams update
//! for Ward's criterion on squared distances. Merges are then sorted by
//! height and relabelled so internal node ids follow the sorted order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Result, SparcaError};

/// Position of pair `(i, j)`, `i < j`, in a condensed `m x m` distance array.
#[inline]
pub fn condensed_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < m);
    m * i - i * (i + 1) / 2 + (j - i - 1)
}

/// Euclidean distances between every pair of columns, in condensed order.
pub fn feature_distances(x: &DataMatrix) -> Result<Vec<f64>> {
    let m = x.n_features();
    if m < 2 {
        return Err(SparcaError::InvalidArgument(format!(
            "need at least 2 features for pairwise distances, got {m}"
        )));
    }
    let rows: Vec<Vec<f64>> = (0..m - 1)
        .into_par_iter()
        .map(|i| {
            let a = x.column(i);
            (i + 1..m)
                .map(|j| {
                    let b = x.column(j);
                    a.iter()
                        .zip(b)
                        .map(|(u, v)| (u - v) * (u - v))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect();
    Ok(rows.concat())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

/// Stepwise dendrogram over `n_leaves` features.
///
/// Leaves are ids `0..n_leaves`; merge `t` creates node `n_leaves + t`.
/// Merges are stored in non-decreasing distance order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linkage {
    pub n_leaves: usize,
    pub merges: Vec<Merge>,
}

/// Per-feature cluster ids in `0..n_clusters`, numbered by smallest member.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub n_clusters: usize,
}

impl ClusterAssignment {
    /// Member indices for each cluster, each list increasing.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (feature, &c) in self.labels.iter().enumerate() {
            out[c].push(feature);
        }
        out
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[drop] = keep;
        keep
    }
}

/// Ward linkage of `m` items from their condensed Euclidean distances.
pub fn ward_linkage(distances: &[f64], m: usize) -> Result<Linkage> {
    if m < 1 {
        return Err(SparcaError::InvalidArgument("linkage over zero items".into()));
    }
    let expected = m * (m - 1) / 2;
    if distances.len() != expected {
        return Err(SparcaError::DimensionMismatch {
            what: "condensed distances",
            expected,
            got: distances.len(),
        });
    }
    if let Some(d) = distances.iter().find(|d| !d.is_finite() || **d < 0.0) {
        return Err(SparcaError::InvalidArgument(format!(
            "distances must be finite and non-negative, found {d}"
        )));
    }

    // squared distances, updated in place; slot `i` holds the cluster whose
    // smallest-index slot is `i`
    let mut d2: Vec<f64> = distances.iter().map(|d| d * d).collect();
    let at = |i: usize, j: usize| {
        if i < j {
            condensed_index(m, i, j)
        } else {
            condensed_index(m, j, i)
        }
    };
    let mut size = vec![1usize; m];
    let mut active = vec![true; m];
    let mut raw: Vec<(usize, usize, f64)> = Vec::with_capacity(m.saturating_sub(1));
    let mut chain: Vec<usize> = Vec::with_capacity(m);

    for _ in 0..m.saturating_sub(1) {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("an active cluster"));
        }
        let (a, b, dist2) = loop {
            let x = *chain.last().unwrap();
            let prev = (chain.len() >= 2).then(|| chain[chain.len() - 2]);
            // prefer the previous chain element on ties so the chain terminates
            let mut best = prev;
            let mut best_d = prev.map_or(f64::INFINITY, |p| d2[at(x, p)]);
            for i in 0..m {
                if i == x || !active[i] || Some(i) == prev {
                    continue;
                }
                let dd = d2[at(x, i)];
                if dd < best_d {
                    best_d = dd;
                    best = Some(i);
                }
            }
            let y = best.expect("at least two active clusters");
            if Some(y) == prev {
                chain.pop();
                chain.pop();
                break (x.min(y), x.max(y), best_d);
            }
            chain.push(y);
        };

        // merge b into a (a < b keeps slot ids stable)
        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for k in 0..m {
            if !active[k] || k == a || k == b {
                continue;
            }
            let sk = size[k] as f64;
            let updated = ((sa + sk) * d2[at(a, k)] + (sb + sk) * d2[at(b, k)] - sk * dist2)
                / (sa + sb + sk);
            d2[at(a, k)] = updated.max(0.0);
        }
        active[b] = false;
        size[a] += size[b];
        raw.push((a, b, dist2));
    }

    // creation order breaks ties in the stable sort
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&i, &j| raw[i].2.total_cmp(&raw[j].2));

    let mut sets = DisjointSet::new(m);
    let mut node_of = (0..m).collect::<Vec<usize>>();
    let mut node_size = vec![1usize; m];
    let mut merges = Vec::with_capacity(raw.len());
    for (t, &r) in order.iter().enumerate() {
        let (a, b, dist2) = raw[r];
        let (ra, rb) = (sets.find(a), sets.find(b));
        let (na, nb) = (node_of[ra], node_of[rb]);
        let size = node_size[ra] + node_size[rb];
        let root = sets.union(ra, rb);
        node_of[root] = m + t;
        node_size[root] = size;
        merges.push(Merge {
            left: na.min(nb),
            right: na.max(nb),
            distance: dist2.max(0.0).sqrt(),
            size,
        });
    }
    Ok(Linkage { n_leaves: m, merges })
}

/// Cuts the dendrogram into exactly `k` clusters by undoing the `k - 1`
/// highest merges.
pub fn cut_to_k(linkage: &Linkage, k: usize) -> Result<ClusterAssignment> {
    let m = linkage.n_leaves;
    if k < 1 || k > m {
        return Err(SparcaError::InvalidArgument(format!(
            "cluster count {k} outside 1..={m}"
        )));
    }
    // leaf representative of every node id
    let mut rep: Vec<usize> = (0..m).collect();
    rep.reserve(linkage.merges.len());
    let mut sets = DisjointSet::new(m);
    for merge in &linkage.merges[..m - k] {
        let (a, b) = (rep[merge.left], rep[merge.right]);
        rep.push(sets.union(a, b));
    }
    let mut id_of_root = vec![usize::MAX; m];
    let mut labels = Vec::with_capacity(m);
    let mut next = 0;
    for leaf in 0..m {
        let root = sets.find(leaf);
        if id_of_root[root] == usize::MAX {
            id_of_root[root] = next;
            next += 1;
        }
        labels.push(id_of_root[root]);
    }
    debug_assert_eq!(next, k);
    Ok(ClusterAssignment {
        labels,
        n_clusters: k,
    })
}
