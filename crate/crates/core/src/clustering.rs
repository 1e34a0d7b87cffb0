// SPDX-License-Identifier: MIT OR Apache-2.0

//! Routine discovery inside a segment: density-based clustering of days, silhouette-driven
//! radius selection and per-routine summaries.

use std::collections::VecDeque;
use std::ops::Range;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::destandardize;
use crate::error::{Error, Result};
use crate::model::PipelineParams;

/// Vectors with a norm at or below this have no direction for cosine distance.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Cosine,
    Euclidean,
}

impl Metric {
    pub fn distance(self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            Metric::Cosine => cosine_distance(u, v),
            Metric::Euclidean => u.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
        }
    }
}

fn norm(u: &[f64]) -> f64 {
    u.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn is_zero_norm(u: &[f64]) -> bool {
    norm(u) <= ZERO_NORM
}

/// `1 - cos(u, v)`, clamped to `[0, 2]`. Defined as 1 when either vector has near-zero norm.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> f64 {
    let (nu, nv) = (norm(u), norm(v));
    if nu <= ZERO_NORM || nv <= ZERO_NORM {
        return 1.0;
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    (1.0 - dot / (nu * nv)).clamp(0.0, 2.0)
}

/// Dense symmetric pairwise distances.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn new(points: ArrayView2<f64>, metric: Metric) -> Self {
        let n = points.nrows();
        let rows: Vec<Vec<f64>> = points.rows().into_iter().map(|r| r.to_vec()).collect();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = metric.distance(&rows[i], &rows[j]);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        // self-distance is 0 by definition, even for degenerate cosine rows
        DistanceMatrix { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// Cluster label per point; `None` is noise. Ids are canonical: numbered in order of each
/// cluster's smallest member index.
pub type Labels = Vec<Option<usize>>;

pub fn dbscan(points: ArrayView2<f64>, eps: f64, min_samples: usize, metric: Metric) -> Labels {
    dbscan_precomputed(&DistanceMatrix::new(points, metric), eps, min_samples)
}

/// DBSCAN over precomputed distances.
///
/// A point is core when at least `min_samples` points, itself included, lie within `eps`.
/// Core points within `eps` of each other share a cluster; a non-core point within `eps` of a
/// core point joins the cluster of its lowest-index core neighbor.
pub fn dbscan_precomputed(dist: &DistanceMatrix, eps: f64, min_samples: usize) -> Labels {
    let n = dist.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dist.get(i, j) <= eps).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_samples).collect();

    let mut component: Vec<Option<usize>> = vec![None; n];
    let mut n_components = 0;
    for start in 0..n {
        if !core[start] || component[start].is_some() {
            continue;
        }
        let id = n_components;
        n_components += 1;
        component[start] = Some(id);
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            for &j in &neighbors[i] {
                if core[j] && component[j].is_none() {
                    component[j] = Some(id);
                    queue.push_back(j);
                }
            }
        }
    }

    let raw: Vec<Option<usize>> = (0..n)
        .map(|i| {
            if core[i] {
                component[i]
            } else {
                neighbors[i].iter().find(|&&j| core[j]).and_then(|&j| component[j])
            }
        })
        .collect();

    let mut rename: Vec<Option<usize>> = vec![None; n_components];
    let mut next = 0;
    raw.iter()
        .map(|label| {
            label.map(|c| {
                *rename[c].get_or_insert_with(|| {
                    next += 1;
                    next - 1
                })
            })
        })
        .collect()
}

pub fn cluster_count(labels: &[Option<usize>]) -> usize {
    labels.iter().flatten().max().map_or(0, |m| m + 1)
}

pub fn noise_count(labels: &[Option<usize>]) -> usize {
    labels.iter().filter(|l| l.is_none()).count()
}

/// Mean silhouette over clustered (non-noise) points; `None` with fewer than two clusters.
pub fn silhouette(points: ArrayView2<f64>, labels: &[Option<usize>], metric: Metric) -> Option<f64> {
    silhouette_precomputed(&DistanceMatrix::new(points, metric), labels)
}

pub fn silhouette_precomputed(dist: &DistanceMatrix, labels: &[Option<usize>]) -> Option<f64> {
    let k = cluster_count(labels);
    if k < 2 {
        return None;
    }
    let mut sizes = vec![0usize; k];
    for c in labels.iter().flatten() {
        sizes[*c] += 1;
    }
    let clustered: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_some()).collect();

    let mut total = 0.0;
    let mut sums = vec![0.0; k];
    for &i in &clustered {
        let own = labels[i].unwrap();
        if sizes[own] == 1 {
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for &j in &clustered {
            if j != i {
                sums[labels[j].unwrap()] += dist.get(i, j);
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let scale = a.max(b);
        if scale > 0.0 {
            total += (b - a) / scale;
        }
    }
    Some(total / clustered.len() as f64)
}

/// Outcome of the radius search for one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct DbscanTuning {
    /// Chosen radius; `None` when no grid value was acceptable.
    pub eps: Option<f64>,
    pub min_samples: usize,
    pub labels: Labels,
    pub silhouette: Option<f64>,
    /// True when the whole segment was collapsed into one routine for lack of a valid setting.
    pub degenerate: bool,
}

/// Grid search over `params.eps_grid` with `min_samples` fixed, keeping settings that produce
/// at least two clusters and no more than `params.max_noise_fraction` noise, and picking the
/// highest silhouette (smallest radius on ties).
pub fn tune_dbscan(points: ArrayView2<f64>, params: &PipelineParams, metric: Metric) -> DbscanTuning {
    let n = points.nrows();
    let fallback = DbscanTuning {
        eps: None,
        min_samples: params.min_samples,
        labels: vec![Some(0); n],
        silhouette: None,
        degenerate: true,
    };
    if n < params.min_samples || n == 0 {
        return fallback;
    }

    let dist = DistanceMatrix::new(points, metric);
    let grid = params.eps_grid.values();
    let scored: Vec<Option<(f64, f64, Labels)>> = grid
        .par_iter()
        .map(|&eps| {
            let labels = dbscan_precomputed(&dist, eps, params.min_samples);
            if cluster_count(&labels) < 2 {
                return None;
            }
            if noise_count(&labels) as f64 / n as f64 > params.max_noise_fraction {
                return None;
            }
            silhouette_precomputed(&dist, &labels).map(|s| (eps, s, labels))
        })
        .collect();

    let mut best: Option<(f64, f64, Labels)> = None;
    for candidate in scored.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| candidate.1 > b.1) {
            best = Some(candidate);
        }
    }
    match best {
        Some((eps, score, labels)) => DbscanTuning {
            eps: Some(eps),
            min_samples: params.min_samples,
            labels,
            silhouette: Some(score),
            degenerate: false,
        },
        None => fallback,
    }
}

/// One routine found in a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster_id: usize,
    /// Day indices relative to the segment start.
    pub member_indices: Vec<usize>,
    pub size: usize,
    pub centroid_std: Vec<f64>,
    /// Centroid in original units; cyclic columns hold averaged sin/cos values.
    pub centroid_raw: Vec<f64>,
    /// Per-feature population variance in standardized space.
    pub variance: Vec<f64>,
    /// Fraction of the segment's days in this routine; noise days count in the denominator.
    pub proportion: f64,
}

impl ClusterSummary {
    /// Mean of the per-feature variances.
    pub fn mean_variance(&self) -> f64 {
        if self.variance.is_empty() {
            0.0
        } else {
            self.variance.iter().sum::<f64>() / self.variance.len() as f64
        }
    }

    pub fn dim(&self) -> usize {
        self.centroid_std.len()
    }
}

/// Builds one summary per cluster label, in id order.
pub fn summarize_clusters(
    points: ArrayView2<f64>,
    labels: &[Option<usize>],
    means: &[f64],
    stds: &[f64],
) -> Result<Vec<ClusterSummary>> {
    let (n, dim) = points.dim();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    let k = cluster_count(labels);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, label) in labels.iter().enumerate() {
        if let Some(c) = label {
            members[*c].push(i);
        }
    }

    members
        .into_iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(cluster_id, member_indices)| {
            let size = member_indices.len();
            let mut centroid = vec![0.0; dim];
            let mut variance = vec![0.0; dim];
            for j in 0..dim {
                let first = points[[member_indices[0], j]];
                if member_indices.iter().all(|&i| points[[i, j]] == first) {
                    centroid[j] = first;
                    continue;
                }
                let mean = member_indices.iter().map(|&i| points[[i, j]]).sum::<f64>() / size as f64;
                centroid[j] = mean;
                variance[j] = member_indices
                    .iter()
                    .map(|&i| (points[[i, j]] - mean).powi(2))
                    .sum::<f64>()
                    / size as f64;
            }
            Ok(ClusterSummary {
                cluster_id,
                centroid_raw: destandardize(&centroid, means, stds)?,
                centroid_std: centroid,
                variance,
                proportion: size as f64 / n as f64,
                size,
                member_indices,
            })
        })
        .collect()
}

/// Routines of one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentClustering {
    pub range: Range<usize>,
    pub clusters: Vec<ClusterSummary>,
    /// Noise day indices relative to the segment start.
    pub noise_indices: Vec<usize>,
    pub eps_used: Option<f64>,
    pub min_samples_used: usize,
    pub silhouette: Option<f64>,
    pub degenerate_clustering: bool,
    /// Days whose standardized vector had no direction under cosine distance.
    pub zero_norm_days: usize,
}

impl SegmentClustering {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }

    pub fn noise_fraction(&self) -> f64 {
        if self.range.is_empty() {
            0.0
        } else {
            self.noise_indices.len() as f64 / self.range.len() as f64
        }
    }

    pub fn clustered_days(&self) -> usize {
        self.clusters.iter().map(|c| c.size).sum()
    }
}

/// Tunes, clusters and summarizes the rows `range` of a standardized matrix.
pub fn cluster_segment(
    standardized: ArrayView2<f64>,
    range: Range<usize>,
    means: &[f64],
    stds: &[f64],
    params: &PipelineParams,
) -> Result<SegmentClustering> {
    let points = standardized.slice(ndarray::s![range.clone(), ..]);
    let tuning = tune_dbscan(points, params, Metric::Cosine);
    let clusters = summarize_clusters(points, &tuning.labels, means, stds)?;
    let noise_indices = tuning
        .labels
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.is_none().then_some(i))
        .collect();
    let zero_norm_days = points.rows().into_iter().filter(|r| is_zero_norm(&r.to_vec())).count();
    Ok(SegmentClustering {
        range,
        clusters,
        noise_indices,
        eps_used: tuning.eps,
        min_samples_used: tuning.min_samples,
        silhouette: tuning.silhouette,
        degenerate_clustering: tuning.degenerate,
        zero_norm_days,
    })
}
