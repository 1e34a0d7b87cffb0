// SPDX-License-Identifier: MIT OR Apache-2.0

//! Routine evolution between a reference period (RP) and the following observation period (OP).
//!
//! Routines of the two periods are compared pairwise; pairs whose combined similarity reaches
//! `tau_s` become edges of a directed bipartite graph RP -> OP, and the degree pattern of each
//! node decides its event:
//!
//! | pattern                                   | event                      |
//! |-------------------------------------------|----------------------------|
//! | `out(i) = in(j) = 1` on edge `(i, j)`     | stable or drift            |
//! | `out(i) = 0`                              | disappeared                |
//! | `in(j) = 0`                               | novel                      |
//! | `out(i) > 1`                              | split of `i`               |
//! | `in(j) > 1`                               | merge into `j`             |
//!
//! Where splits and merges overlap, the linked routines are decomposed into disjoint stars so
//! every routine appears in exactly one event; such events carry a `complex` flag.
//!
//! Clusters are referenced by their position in the RP/OP slices, which equals their
//! canonical `cluster_id`.

use serde::{Deserialize, Serialize};

use crate::clustering::{ClusterSummary, SegmentClustering};
use crate::error::{Error, Result};
use crate::metrics::{MassVector, mass_vector};

const WEIGHT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights {
    pub centroid: f64,
    pub variance: f64,
}

impl SimilarityWeights {
    pub fn new(centroid: f64, variance: f64) -> Result<Self> {
        let ok = [centroid, variance].iter().all(|w| (0.0..=1.0).contains(w))
            && (centroid + variance - 1.0).abs() <= WEIGHT_TOLERANCE;
        if ok {
            Ok(Self { centroid, variance })
        } else {
            Err(Error::WeightSum("similarity"))
        }
    }
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        Self {
            centroid: 0.7,
            variance: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftWeights {
    pub proportion: f64,
    pub centroid: f64,
    pub variance: f64,
}

impl DriftWeights {
    pub fn new(proportion: f64, centroid: f64, variance: f64) -> Result<Self> {
        let ok = [proportion, centroid, variance].iter().all(|w| (0.0..=1.0).contains(w))
            && (proportion + centroid + variance - 1.0).abs() <= WEIGHT_TOLERANCE;
        if ok {
            Ok(Self {
                proportion,
                centroid,
                variance,
            })
        } else {
            Err(Error::WeightSum("drift"))
        }
    }
}

impl Default for DriftWeights {
    fn default() -> Self {
        Self {
            proportion: 1.0 / 3.0,
            centroid: 1.0 / 3.0,
            variance: 1.0 / 3.0,
        }
    }
}

fn check_dims(a: &ClusterSummary, b: &ClusterSummary) -> Result<()> {
    if a.dim() != b.dim() || a.variance.len() != b.variance.len() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    Ok(())
}

/// Gaussian-kernel similarity of two centroids, scaled by the pooled mean variance.
///
/// `exp(-d^2 / (2 s^2))` with `d` the centroid distance and `s^2` the average of the two
/// clusters' mean per-feature variances. With `s = 0` the result is 1 for `d = 0`, else 0.
pub fn centroid_similarity(a: &ClusterSummary, b: &ClusterSummary) -> Result<f64> {
    check_dims(a, b)?;
    let d2: f64 = a
        .centroid_std
        .iter()
        .zip(&b.centroid_std)
        .map(|(x, y)| (x - y).powi(2))
        .sum();
    let pooled = (a.mean_variance() + b.mean_variance()) / 2.0;
    if pooled == 0.0 {
        return Ok(if d2 == 0.0 { 1.0 } else { 0.0 });
    }
    Ok((-d2 / (2.0 * pooled)).exp())
}

/// Mean over features of `min(var) / max(var)`.
pub fn variance_similarity(a: &ClusterSummary, b: &ClusterSummary) -> Result<f64> {
    variance_similarity_masked(a, b, None)
}

/// [`variance_similarity`] restricted to the features where `mask` is true. Features with
/// both variances zero agree fully; exactly one zero disagrees fully.
pub fn variance_similarity_masked(a: &ClusterSummary, b: &ClusterSummary, mask: Option<&[bool]>) -> Result<f64> {
    check_dims(a, b)?;
    if let Some(m) = mask {
        if m.len() != a.variance.len() {
            return Err(Error::DimensionMismatch {
                expected: a.variance.len(),
                actual: m.len(),
            });
        }
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (f, (&va, &vb)) in a.variance.iter().zip(&b.variance).enumerate() {
        if mask.is_some_and(|m| !m[f]) {
            continue;
        }
        count += 1;
        let hi = va.max(vb);
        total += if hi == 0.0 { 1.0 } else { va.min(vb) / hi };
    }
    Ok(if count == 0 { 1.0 } else { total / count as f64 })
}

pub fn combined_similarity(a: &ClusterSummary, b: &ClusterSummary, weights: &SimilarityWeights) -> Result<f64> {
    Ok(weights.centroid * centroid_similarity(a, b)? + weights.variance * variance_similarity(a, b)?)
}

/// Similarity scores of one RP/OP pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityEdge {
    pub rp_cluster: usize,
    pub op_cluster: usize,
    pub sim_centroid: f64,
    pub sim_var: f64,
    pub sim_combined: f64,
}

/// Configuration for building the RP/OP graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityParams {
    pub tau_s: f64,
    pub weights: SimilarityWeights,
    /// Features entering the variance agreement; `None` uses all.
    pub feature_mask: Option<Vec<bool>>,
}

impl SimilarityParams {
    pub fn new(tau_s: f64, weights: SimilarityWeights) -> Self {
        Self {
            tau_s,
            weights,
            feature_mask: None,
        }
    }

    pub fn with_feature_mask(mut self, mask: Vec<bool>) -> Self {
        self.feature_mask = Some(mask);
        self
    }
}

/// Thresholded directed bipartite graph between RP and OP routines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    pub n_rp: usize,
    pub n_op: usize,
    pub tau_s: f64,
    /// Every RP/OP pair, row-major by RP cluster.
    pub similarities: Vec<SimilarityEdge>,
    /// Pairs with `sim_combined >= tau_s`.
    pub edges: Vec<SimilarityEdge>,
}

impl BipartiteGraph {
    pub fn successors(&self, rp: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.rp_cluster == rp)
            .map(|e| e.op_cluster)
    }

    pub fn predecessors(&self, op: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.op_cluster == op)
            .map(|e| e.rp_cluster)
    }

    pub fn out_degree(&self, rp: usize) -> usize {
        self.successors(rp).count()
    }

    pub fn in_degree(&self, op: usize) -> usize {
        self.predecessors(op).count()
    }

    pub fn similarity(&self, rp: usize, op: usize) -> &SimilarityEdge {
        &self.similarities[rp * self.n_op + op]
    }

    /// Same pairs, thresholded at a different `tau_s`.
    pub fn rethreshold(&self, tau_s: f64) -> BipartiteGraph {
        BipartiteGraph {
            tau_s,
            edges: self
                .similarities
                .iter()
                .filter(|e| e.sim_combined >= tau_s)
                .copied()
                .collect(),
            ..self.clone()
        }
    }
}

pub fn build_bipartite_graph(
    rp: &[ClusterSummary],
    op: &[ClusterSummary],
    params: &SimilarityParams,
) -> Result<BipartiteGraph> {
    let mut similarities = Vec::with_capacity(rp.len() * op.len());
    for (i, a) in rp.iter().enumerate() {
        for (j, b) in op.iter().enumerate() {
            let sim_centroid = centroid_similarity(a, b)?;
            let sim_var = variance_similarity_masked(a, b, params.feature_mask.as_deref())?;
            similarities.push(SimilarityEdge {
                rp_cluster: i,
                op_cluster: j,
                sim_centroid,
                sim_var,
                sim_combined: params.weights.centroid * sim_centroid + params.weights.variance * sim_var,
            });
        }
    }
    let graph = BipartiteGraph {
        n_rp: rp.len(),
        n_op: op.len(),
        tau_s: params.tau_s,
        similarities,
        edges: Vec::new(),
    };
    Ok(graph.rethreshold(params.tau_s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    Stable,
    Drift,
    Novel,
    Disappeared,
    Split,
    Merge,
}

impl EventType {
    pub const ALL: [EventType; 6] = [
        EventType::Stable,
        EventType::Drift,
        EventType::Novel,
        EventType::Disappeared,
        EventType::Split,
        EventType::Merge,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventType::Stable => "stable",
            EventType::Drift => "drift",
            EventType::Novel => "novel",
            EventType::Disappeared => "disappeared",
            EventType::Split => "split",
            EventType::Merge => "merge",
        }
    }
}

impl std::fmt::Display for EventType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Components of the drift between two linked routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftComponents {
    /// Absolute change in proportion.
    pub p_delta: f64,
    /// One minus centroid similarity.
    pub c_delta: f64,
    /// Relative change in mean variance.
    pub v_delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftBreakdown {
    pub p_delta: f64,
    pub c_delta: f64,
    pub v_delta: f64,
    pub score: f64,
}

pub fn drift_components(rp: &ClusterSummary, op: &ClusterSummary) -> Result<DriftComponents> {
    let (vi, vj) = (rp.mean_variance(), op.mean_variance());
    let hi = vi.max(vj);
    Ok(DriftComponents {
        p_delta: (op.proportion - rp.proportion).abs(),
        c_delta: 1.0 - centroid_similarity(rp, op)?,
        v_delta: if hi == 0.0 { 0.0 } else { (vj - vi).abs() / hi },
    })
}

pub fn drift_score(components: &DriftComponents, weights: &DriftWeights) -> f64 {
    weights.proportion * components.p_delta
        + weights.centroid * components.c_delta
        + weights.variance * components.v_delta
}

fn breakdown(rp: &ClusterSummary, op: &ClusterSummary, weights: &DriftWeights) -> Result<DriftBreakdown> {
    let c = drift_components(rp, op)?;
    Ok(DriftBreakdown {
        p_delta: c.p_delta,
        c_delta: c.c_delta,
        v_delta: c.v_delta,
        score: drift_score(&c, weights),
    })
}

/// One classified reorganization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionEvent {
    pub event_type: EventType,
    pub rp_clusters: Vec<usize>,
    pub op_clusters: Vec<usize>,
    pub drift: Option<DriftBreakdown>,
    /// Graph edges leaving this event's RP routines.
    pub edges: Vec<SimilarityEdge>,
    /// Set when a split and a merge competed for the same routines.
    pub complex: bool,
}

/// Assigns every RP and OP routine to exactly one event.
///
/// Routines without edges are disappeared (RP) or novel (OP). The linked routines are covered
/// by disjoint stars: a maximum matching pairs routines, and each routine left unmatched
/// joins its most similar matched neighbour. A star centred on an RP routine is a split, one
/// centred on an OP routine is a merge, and a bare matched pair is a continuity link. On
/// components that already are stars this reproduces the degree rules exactly; elsewhere the
/// events are marked `complex`.
pub fn classify_events(
    graph: &BipartiteGraph,
    rp: &[ClusterSummary],
    op: &[ClusterSummary],
    tau_d: f64,
    weights: &DriftWeights,
) -> Result<Vec<EvolutionEvent>> {
    if graph.n_rp != rp.len() || graph.n_op != op.len() {
        return Err(Error::DimensionMismatch {
            expected: graph.n_rp + graph.n_op,
            actual: rp.len() + op.len(),
        });
    }
    let out: Vec<usize> = (0..rp.len()).map(|i| graph.out_degree(i)).collect();
    let inn: Vec<usize> = (0..op.len()).map(|j| graph.in_degree(j)).collect();
    let sim = |i: usize, j: usize| graph.similarity(i, j).sim_combined;

    // successors by decreasing similarity, ties by index
    let succ: Vec<Vec<usize>> = (0..rp.len())
        .map(|i| {
            let mut s: Vec<usize> = graph.successors(i).collect();
            s.sort_by(|&a, &b| sim(i, b).total_cmp(&sim(i, a)).then(a.cmp(&b)));
            s
        })
        .collect();
    let mut match_rp: Vec<Option<usize>> = vec![None; rp.len()];
    let mut match_op: Vec<Option<usize>> = vec![None; op.len()];
    for i in 0..rp.len() {
        let mut seen = vec![false; op.len()];
        augment(i, &succ, &mut seen, &mut match_rp, &mut match_op);
    }

    let best = |cands: &mut dyn Iterator<Item = (usize, f64)>| {
        cands
            .fold(None, |acc: Option<(usize, f64)>, (k, s)| match acc {
                Some((_, bs)) if bs >= s => acc,
                _ => Some((k, s)),
            })
            .map(|(k, _)| k)
    };
    let mut op_leaves: Vec<Vec<usize>> = vec![Vec::new(); rp.len()];
    let mut rp_leaves: Vec<Vec<usize>> = vec![Vec::new(); op.len()];
    for j in (0..op.len()).filter(|&j| match_op[j].is_none() && inn[j] > 0) {
        let i = best(&mut graph.predecessors(j).map(|i| (i, sim(i, j)))).expect("has predecessor");
        op_leaves[i].push(j);
    }
    for i in (0..rp.len()).filter(|&i| match_rp[i].is_none() && out[i] > 0) {
        let j = best(&mut graph.successors(i).map(|j| (j, sim(i, j)))).expect("has successor");
        rp_leaves[j].push(i);
    }

    let mut events = Vec::new();
    for (i, m) in match_rp.iter().enumerate() {
        let Some(j) = *m else { continue };
        // a maximum matching admits no augmenting path, so at most one side has leaves
        debug_assert!(op_leaves[i].is_empty() || rp_leaves[j].is_empty());
        let event = if !op_leaves[i].is_empty() {
            let mut ops = vec![j];
            ops.extend(&op_leaves[i]);
            ops.sort_unstable();
            let complex = out[i] != ops.len() || ops.iter().any(|&o| inn[o] != 1);
            EvolutionEvent {
                event_type: EventType::Split,
                rp_clusters: vec![i],
                op_clusters: ops,
                drift: None,
                edges: Vec::new(),
                complex,
            }
        } else if !rp_leaves[j].is_empty() {
            let mut rps = vec![i];
            rps.extend(&rp_leaves[j]);
            rps.sort_unstable();
            let complex = inn[j] != rps.len() || rps.iter().any(|&r| out[r] != 1);
            EvolutionEvent {
                event_type: EventType::Merge,
                rp_clusters: rps,
                op_clusters: vec![j],
                drift: None,
                edges: Vec::new(),
                complex,
            }
        } else {
            let drift = breakdown(&rp[i], &op[j], weights)?;
            EvolutionEvent {
                event_type: if drift.score < tau_d {
                    EventType::Stable
                } else {
                    EventType::Drift
                },
                rp_clusters: vec![i],
                op_clusters: vec![j],
                drift: Some(drift),
                edges: Vec::new(),
                complex: out[i] != 1 || inn[j] != 1,
            }
        };
        events.push(event);
    }
    for i in (0..rp.len()).filter(|&i| out[i] == 0) {
        events.push(EvolutionEvent {
            event_type: EventType::Disappeared,
            rp_clusters: vec![i],
            op_clusters: Vec::new(),
            drift: None,
            edges: Vec::new(),
            complex: false,
        });
    }
    for j in (0..op.len()).filter(|&j| inn[j] == 0) {
        events.push(EvolutionEvent {
            event_type: EventType::Novel,
            rp_clusters: Vec::new(),
            op_clusters: vec![j],
            drift: None,
            edges: Vec::new(),
            complex: false,
        });
    }

    for event in &mut events {
        event.edges = graph
            .edges
            .iter()
            .filter(|e| event.rp_clusters.contains(&e.rp_cluster))
            .copied()
            .collect();
    }
    events.sort_by_key(|e| {
        (
            e.rp_clusters.first().copied().unwrap_or(usize::MAX),
            e.op_clusters.first().copied().unwrap_or(usize::MAX),
        )
    });
    Ok(events)
}

/// Kuhn's augmenting-path step for RP routine `i`.
fn augment(
    i: usize,
    succ: &[Vec<usize>],
    seen: &mut [bool],
    match_rp: &mut [Option<usize>],
    match_op: &mut [Option<usize>],
) -> bool {
    for &j in &succ[i] {
        if seen[j] {
            continue;
        }
        seen[j] = true;
        let free = match match_op[j] {
            None => true,
            Some(k) => augment(k, succ, seen, match_rp, match_op),
        };
        if free {
            match_op[j] = Some(i);
            match_rp[i] = Some(j);
            return true;
        }
    }
    false
}

/// Mass vector for one `(tau_s, tau_d)` setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSweepPoint {
    pub tau_s: f64,
    pub tau_d: f64,
    pub mass: MassVector,
}

/// Re-classifies one RP/OP pair over a grid of thresholds. Similarities are computed once.
pub fn sweep_thresholds(
    rp: &SegmentClustering,
    op: &SegmentClustering,
    tau_s_values: &[f64],
    tau_d_values: &[f64],
    similarity: &SimilarityParams,
    drift_weights: &DriftWeights,
) -> Result<Vec<ThresholdSweepPoint>> {
    let base = build_bipartite_graph(&rp.clusters, &op.clusters, similarity)?;
    let mut points = Vec::with_capacity(tau_s_values.len() * tau_d_values.len());
    for &tau_s in tau_s_values {
        let graph = base.rethreshold(tau_s);
        for &tau_d in tau_d_values {
            let events = classify_events(&graph, &rp.clusters, &op.clusters, tau_d, drift_weights)?;
            let mass = mass_vector(&events, &rp.clusters, &op.clusters, rp.len(), op.len())?;
            points.push(ThresholdSweepPoint { tau_s, tau_d, mass });
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub(crate) fn summary(id: usize, centroid: &[f64], variance: &[f64], size: usize, prop: f64) -> ClusterSummary {
        ClusterSummary {
            cluster_id: id,
            member_indices: (0..size).collect(),
            size,
            centroid_std: centroid.to_vec(),
            centroid_raw: centroid.to_vec(),
            variance: variance.to_vec(),
            proportion: prop,
        }
    }

    fn graph_with_edges(n_rp: usize, n_op: usize, edges: &[(usize, usize)]) -> BipartiteGraph {
        let similarities: Vec<SimilarityEdge> = (0..n_rp)
            .flat_map(|i| (0..n_op).map(move |j| (i, j)))
            .map(|(i, j)| {
                let s = if edges.contains(&(i, j)) { 0.9 } else { 0.1 };
                SimilarityEdge {
                    rp_cluster: i,
                    op_cluster: j,
                    sim_centroid: s,
                    sim_var: s,
                    sim_combined: s,
                }
            })
            .collect();
        BipartiteGraph {
            n_rp,
            n_op,
            tau_s: 0.5,
            similarities,
            edges: Vec::new(),
        }
        .rethreshold(0.5)
    }

    fn blank(n: usize) -> Vec<ClusterSummary> {
        (0..n)
            .map(|i| summary(i, &[i as f64, 1.0], &[1.0, 1.0], 10, 0.2))
            .collect()
    }

    #[test]
    fn centroid_similarity_examples() {
        let a = summary(0, &[0.0, 0.0], &[1.0, 1.0], 5, 0.5);
        assert_eq!(centroid_similarity(&a, &a).unwrap(), 1.0);
        // pooled scale is 1, so d = 1 hits exp(-1/2)
        let b = summary(1, &[1.0, 0.0], &[1.0, 1.0], 5, 0.5);
        assert_abs_diff_eq!(centroid_similarity(&a, &b).unwrap(), (-0.5f64).exp(), epsilon = 1e-12);
        let z = summary(0, &[0.0, 0.0], &[0.0, 0.0], 5, 0.5);
        let z2 = summary(1, &[0.5, 0.0], &[0.0, 0.0], 5, 0.5);
        assert_eq!(centroid_similarity(&z, &z2).unwrap(), 0.0);
        assert_eq!(centroid_similarity(&z, &z).unwrap(), 1.0);
        let short = summary(2, &[0.0], &[1.0], 5, 0.5);
        assert!(centroid_similarity(&a, &short).is_err());
    }

    #[test]
    fn variance_similarity_examples() {
        let a = summary(0, &[0.0, 0.0], &[1.0, 4.0], 5, 0.5);
        let b = summary(1, &[0.0, 0.0], &[4.0, 1.0], 5, 0.5);
        assert_eq!(variance_similarity(&a, &b).unwrap(), 0.25);
        assert_eq!(variance_similarity(&a, &a).unwrap(), 1.0);
        let c = summary(0, &[0.0, 0.0], &[0.0, 1.0], 5, 0.5);
        assert_eq!(variance_similarity(&c, &c).unwrap(), 1.0);
        let d = summary(0, &[0.0, 0.0], &[0.0, 1.0], 5, 0.5);
        let e = summary(0, &[0.0, 0.0], &[2.0, 1.0], 5, 0.5);
        assert_eq!(variance_similarity(&d, &e).unwrap(), 0.5);
        assert_eq!(variance_similarity_masked(&d, &e, Some(&[false, true])).unwrap(), 1.0);
    }

    #[test]
    fn combined_similarity_examples() {
        let a = summary(0, &[0.0, 0.0], &[1.0, 4.0], 5, 0.5);
        let b = summary(1, &[1.0, 0.0], &[4.0, 1.0], 5, 0.5);
        // pooled mean variance is 2.5, so d^2 = 1 gives exp(-1/5)
        let sc = (-0.2f64).exp();
        let expected = 0.7 * sc + 0.3 * 0.25;
        let w = SimilarityWeights::default();
        assert_abs_diff_eq!(combined_similarity(&a, &b, &w).unwrap(), expected, epsilon = 1e-12);
        assert_eq!(combined_similarity(&a, &a, &w).unwrap(), 1.0);
        let only_centroid = SimilarityWeights::new(1.0, 0.0).unwrap();
        assert_eq!(
            combined_similarity(&a, &b, &only_centroid).unwrap(),
            centroid_similarity(&a, &b).unwrap()
        );
        assert!(SimilarityWeights::new(0.9, 0.2).is_err());
    }

    #[test]
    fn graph_threshold_limits() {
        let rp = blank(2);
        let op = blank(3);
        let all = build_bipartite_graph(&rp, &op, &SimilarityParams::new(0.0, SimilarityWeights::default())).unwrap();
        assert_eq!(all.edges.len(), 6);
        let empty_rp =
            build_bipartite_graph(&[], &op, &SimilarityParams::new(0.5, SimilarityWeights::default())).unwrap();
        assert!(empty_rp.edges.is_empty());
        let events = classify_events(&empty_rp, &[], &op, 0.25, &DriftWeights::default()).unwrap();
        assert!(events.iter().all(|e| e.event_type == EventType::Novel));
        assert_eq!(events.len(), 3);
    }

    #[test]
    fn matching_pairs_make_two_edges() {
        let rp = vec![
            summary(0, &[3.0, 0.0], &[0.1, 0.1], 10, 0.5),
            summary(1, &[0.0, 3.0], &[0.1, 0.1], 10, 0.5),
        ];
        let op = vec![
            summary(0, &[3.05, 0.0], &[0.1, 0.1], 10, 0.5),
            summary(1, &[0.0, 2.95], &[0.1, 0.1], 10, 0.5),
        ];
        let g = build_bipartite_graph(&rp, &op, &SimilarityParams::new(0.5, SimilarityWeights::default())).unwrap();
        let pairs: Vec<_> = g.edges.iter().map(|e| (e.rp_cluster, e.op_cluster)).collect();
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
        let events = classify_events(&g, &rp, &op, 0.25, &DriftWeights::default()).unwrap();
        assert!(events.iter().all(|e| e.event_type == EventType::Stable));
    }

    #[test]
    fn degree_rules() {
        let rp = blank(2);
        let op = blank(2);
        let w = DriftWeights::default();

        let g = graph_with_edges(1, 2, &[(0, 0), (0, 1)]);
        let ev = classify_events(&g, &rp[..1], &op, 0.25, &w).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].event_type, EventType::Split);
        assert_eq!(ev[0].op_clusters, vec![0, 1]);
        assert!(!ev[0].complex);

        let g = graph_with_edges(2, 1, &[(0, 0), (1, 0)]);
        let ev = classify_events(&g, &rp, &op[..1], 0.25, &w).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].event_type, EventType::Merge);
        assert_eq!(ev[0].rp_clusters, vec![0, 1]);

        let g = graph_with_edges(2, 2, &[(0, 0)]);
        let ev = classify_events(&g, &rp, &op, 0.25, &w).unwrap();
        let types: Vec<_> = ev.iter().map(|e| e.event_type).collect();
        assert!(types.contains(&EventType::Disappeared));
        assert!(types.contains(&EventType::Novel));
        assert_eq!(ev.len(), 3);
    }

    #[test]
    fn identical_link_is_stable() {
        let rp = blank(1);
        let g = graph_with_edges(1, 1, &[(0, 0)]);
        let ev = classify_events(&g, &rp, &rp, 0.25, &DriftWeights::default()).unwrap();
        assert_eq!(ev[0].event_type, EventType::Stable);
        assert_eq!(ev[0].drift.unwrap().score, 0.0);
        // score equal to the threshold counts as drift
        let ev = classify_events(&g, &rp, &rp, 0.0, &DriftWeights::default()).unwrap();
        assert_eq!(ev[0].event_type, EventType::Drift);
    }

    #[test]
    fn overlap_resolves_to_stars() {
        // RP0 -> {OP0, OP1}, RP1 -> OP1
        let rp = blank(2);
        let op = blank(2);
        let g = graph_with_edges(2, 2, &[(0, 0), (0, 1), (1, 1)]);
        let ev = classify_events(&g, &rp, &op, 0.25, &DriftWeights::default()).unwrap();
        assert_eq!(ev.len(), 2);
        assert_eq!(
            (ev[0].rp_clusters.clone(), ev[0].op_clusters.clone()),
            (vec![0], vec![0])
        );
        assert_eq!(
            (ev[1].rp_clusters.clone(), ev[1].op_clusters.clone()),
            (vec![1], vec![1])
        );
        assert!(ev.iter().all(|e| e.complex && e.drift.is_some()));
        assert_eq!(ev[0].edges.len(), 2, "edges stay with their RP routine");

        // RP0 -> {OP0, OP1, OP2}, RP1 -> OP2
        let op = blank(3);
        let g = graph_with_edges(2, 3, &[(0, 0), (0, 1), (0, 2), (1, 2)]);
        let ev = classify_events(&g, &rp, &op, 0.25, &DriftWeights::default()).unwrap();
        assert_eq!(ev[0].event_type, EventType::Split);
        assert_eq!(ev[0].op_clusters, vec![0, 1]);
        assert_eq!(ev[1].rp_clusters, vec![1]);
        assert_eq!(ev[1].op_clusters, vec![2]);
    }

    #[test]
    fn complete_graph_leaves_nothing_unlinked() {
        for (m, n) in [(2, 2), (2, 5), (4, 2), (3, 3), (1, 4), (5, 1)] {
            let edges: Vec<_> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
            let g = graph_with_edges(m, n, &edges);
            let ev = classify_events(&g, &blank(m), &blank(n), 0.25, &DriftWeights::default()).unwrap();
            assert!(
                ev.iter()
                    .all(|e| !matches!(e.event_type, EventType::Novel | EventType::Disappeared))
            );
            let rp_seen: usize = ev.iter().map(|e| e.rp_clusters.len()).sum();
            let op_seen: usize = ev.iter().map(|e| e.op_clusters.len()).sum();
            assert_eq!((rp_seen, op_seen), (m, n));
        }
    }

    #[test]
    fn drift_examples() {
        let a = summary(0, &[0.0], &[2.0], 69, 0.69);
        let b = summary(1, &[0.0], &[1.0], 40, 0.40);
        let c = drift_components(&a, &b).unwrap();
        assert_abs_diff_eq!(c.p_delta, 0.29, epsilon = 1e-12);
        assert_abs_diff_eq!(c.v_delta, 0.5, epsilon = 1e-12);
        assert_eq!(c.c_delta, 0.0);

        let same = drift_components(&a, &a).unwrap();
        assert_eq!((same.p_delta, same.c_delta, same.v_delta), (0.0, 0.0, 0.0));
        let z = summary(0, &[0.0], &[0.0], 5, 0.5);
        assert_eq!(drift_components(&z, &z).unwrap().v_delta, 0.0);

        let comps = DriftComponents {
            p_delta: 0.3,
            c_delta: 0.5,
            v_delta: 0.6,
        };
        assert_abs_diff_eq!(
            drift_score(&comps, &DriftWeights::default()),
            1.4 / 3.0,
            epsilon = 1e-12
        );
        let only_p = DriftWeights::new(1.0, 0.0, 0.0).unwrap();
        assert_eq!(drift_score(&comps, &only_p), 0.3);
        assert!(DriftWeights::new(0.5, 0.5, 0.5).is_err());
    }
}
