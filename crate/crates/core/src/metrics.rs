// SPDX-License-Identifier: MIT OR Apache-2.0

//! Event masses per change point and cohort-level aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::clustering::ClusterSummary;
use crate::error::{Error, Result};
use crate::evolution::{EventType, EvolutionEvent};

/// Fraction of a period's days carried by routines of each event type.
///
/// All components except `m_novel` use the RP length as denominator; `m_novel` uses the OP
/// length. Noise days belong to no routine, so the RP-side components sum to the clustered
/// fraction of the RP rather than to 1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MassVector {
    pub m_stable: f64,
    pub m_drifted: f64,
    pub m_novel: f64,
    pub m_disappeared: f64,
    pub m_split: f64,
    pub m_merged: f64,
    pub m_unstable: f64,
}

impl MassVector {
    pub fn get(&self, event: EventType) -> f64 {
        match event {
            EventType::Stable => self.m_stable,
            EventType::Drift => self.m_drifted,
            EventType::Novel => self.m_novel,
            EventType::Disappeared => self.m_disappeared,
            EventType::Split => self.m_split,
            EventType::Merge => self.m_merged,
        }
    }

    /// Sum of the RP-side components.
    pub fn rp_total(&self) -> f64 {
        self.m_stable + self.m_drifted + self.m_disappeared + self.m_split + self.m_merged
    }
}

pub fn unstable_mass(v: &MassVector) -> f64 {
    v.m_drifted + v.m_novel + v.m_disappeared + v.m_split + v.m_merged
}

/// Computes the mass vector of one change point from its classified events.
pub fn mass_vector(
    events: &[EvolutionEvent],
    rp: &[ClusterSummary],
    op: &[ClusterSummary],
    rp_length: usize,
    op_length: usize,
) -> Result<MassVector> {
    if rp_length == 0 {
        return Err(Error::EmptyPeriod("reference"));
    }
    if op_length == 0 {
        return Err(Error::EmptyPeriod("observation"));
    }
    let size = |clusters: &[ClusterSummary], idx: usize| -> Result<f64> {
        clusters
            .get(idx)
            .map(|c| c.size as f64)
            .ok_or(Error::DimensionMismatch {
                expected: clusters.len(),
                actual: idx + 1,
            })
    };
    let mut v = MassVector::default();
    for e in events {
        let mass = if e.event_type == EventType::Novel {
            e.op_clusters.iter().map(|&j| size(op, j)).sum::<Result<f64>>()? / op_length as f64
        } else {
            e.rp_clusters.iter().map(|&i| size(rp, i)).sum::<Result<f64>>()? / rp_length as f64
        };
        let slot = match e.event_type {
            EventType::Stable => &mut v.m_stable,
            EventType::Drift => &mut v.m_drifted,
            EventType::Novel => &mut v.m_novel,
            EventType::Disappeared => &mut v.m_disappeared,
            EventType::Split => &mut v.m_split,
            EventType::Merge => &mut v.m_merged,
        };
        *slot += mass;
    }
    v.m_unstable = unstable_mass(&v);
    Ok(v)
}

/// Per-subject, per-dimension pipeline outcome entering cohort aggregation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectOutcome {
    pub subject_id: String,
    pub cohort: String,
    pub dimension: String,
    pub change_point_count: usize,
    pub mass_vectors: Vec<MassVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub cohort: String,
    pub dimension: String,
    pub n_subjects: usize,
    /// Change-point count per subject, in subject-id order.
    pub change_counts: BTreeMap<String, usize>,
    pub change_count_mean: f64,
    pub change_count_median: f64,
    /// Mass values over all observed change points, keyed by event type, plus `unstable`.
    pub mass_distributions: BTreeMap<String, Vec<f64>>,
    /// Mean of each distribution; absent when the cohort has no change points.
    pub mean_mass: BTreeMap<String, f64>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Groups outcomes by `(cohort, dimension)` and summarizes each group.
pub fn cohort_aggregate(outcomes: &[SubjectOutcome]) -> Result<Vec<CohortSummary>> {
    if outcomes.is_empty() {
        return Err(Error::EmptyCohort("no subjects".into()));
    }
    let mut groups: BTreeMap<(&str, &str), Vec<&SubjectOutcome>> = BTreeMap::new();
    for o in outcomes {
        groups.entry((&o.cohort, &o.dimension)).or_default().push(o);
    }
    let keys: Vec<&'static str> = EventType::ALL.iter().map(|e| e.as_str()).chain(["unstable"]).collect();

    let mut out = Vec::with_capacity(groups.len());
    for ((cohort, dimension), members) in groups {
        let change_counts: BTreeMap<String, usize> = members
            .iter()
            .map(|o| (o.subject_id.clone(), o.change_point_count))
            .collect();
        let mut counts: Vec<f64> = members.iter().map(|o| o.change_point_count as f64).collect();
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;

        let mut dists: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for o in &members {
            for v in &o.mass_vectors {
                for (k, e) in keys.iter().zip(EventType::ALL.iter().map(Some).chain([None])) {
                    let value = e.map_or(v.m_unstable, |e| v.get(*e));
                    dists.entry((*k).to_string()).or_default().push(value);
                }
            }
        }
        let mean_mass = dists
            .iter()
            .map(|(k, xs)| (k.clone(), xs.iter().sum::<f64>() / xs.len() as f64))
            .collect();
        out.push(CohortSummary {
            cohort: cohort.to_string(),
            dimension: dimension.to_string(),
            n_subjects: members.len(),
            change_counts,
            change_count_mean: mean,
            change_count_median: median(&mut counts),
            mass_distributions: dists,
            mean_mass,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cluster(id: usize, size: usize) -> ClusterSummary {
        ClusterSummary {
            cluster_id: id,
            member_indices: (0..size).collect(),
            size,
            centroid_std: vec![0.0],
            centroid_raw: vec![0.0],
            variance: vec![1.0],
            proportion: 0.0,
        }
    }

    fn event(t: EventType, rp: &[usize], op: &[usize]) -> EvolutionEvent {
        EvolutionEvent {
            event_type: t,
            rp_clusters: rp.to_vec(),
            op_clusters: op.to_vec(),
            drift: None,
            edges: Vec::new(),
            complex: false,
        }
    }

    #[test]
    fn all_stable() {
        let v = mass_vector(
            &[event(EventType::Stable, &[0], &[0])],
            &[cluster(0, 60)],
            &[cluster(0, 50)],
            60,
            50,
        )
        .unwrap();
        assert_eq!(v.m_stable, 1.0);
        assert_eq!(v.m_unstable, 0.0);
        assert_eq!(unstable_mass(&v), 0.0);
    }

    #[test]
    fn merge_mass_counts_all_predecessors() {
        let rp = [cluster(0, 30), cluster(1, 20)];
        let v = mass_vector(
            &[event(EventType::Merge, &[0, 1], &[0])],
            &rp,
            &[cluster(0, 40)],
            60,
            40,
        )
        .unwrap();
        assert_abs_diff_eq!(v.m_merged, 50.0 / 60.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v.rp_total(), 50.0 / 60.0, epsilon = 1e-15);
    }

    #[test]
    fn novel_uses_op_denominator() {
        let op = [cluster(0, 18)];
        let v = mass_vector(&[event(EventType::Novel, &[], &[0])], &[], &op, 60, 90).unwrap();
        assert_abs_diff_eq!(v.m_novel, 0.2, epsilon = 1e-15);
    }

    #[test]
    fn split_counts_parent_once() {
        let v = mass_vector(
            &[event(EventType::Split, &[0], &[0, 1])],
            &[cluster(0, 40)],
            &[cluster(0, 20), cluster(1, 20)],
            40,
            40,
        )
        .unwrap();
        assert_eq!(v.m_split, 1.0);
    }

    #[test]
    fn unstable_sum_example() {
        let v = MassVector {
            m_stable: 0.5,
            m_drifted: 0.2,
            m_novel: 0.1,
            m_disappeared: 0.1,
            ..Default::default()
        };
        assert_abs_diff_eq!(unstable_mass(&v), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn zero_length_period_errors() {
        assert!(matches!(mass_vector(&[], &[], &[], 0, 5), Err(Error::EmptyPeriod(_))));
        assert!(matches!(mass_vector(&[], &[], &[], 5, 0), Err(Error::EmptyPeriod(_))));
    }

    fn outcome(id: &str, cohort: &str, count: usize, masses: Vec<MassVector>) -> SubjectOutcome {
        SubjectOutcome {
            subject_id: id.into(),
            cohort: cohort.into(),
            dimension: "sleep".into(),
            change_point_count: count,
            mass_vectors: masses,
        }
    }

    #[test]
    fn identical_subjects_average_to_themselves() {
        let m = MassVector {
            m_stable: 0.6,
            m_drifted: 0.3,
            m_unstable: 0.3,
            ..Default::default()
        };
        let s = cohort_aggregate(&[outcome("a", "x", 2, vec![m; 2]), outcome("b", "x", 2, vec![m; 2])]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].change_count_mean, 2.0);
        assert_eq!(s[0].change_count_median, 2.0);
        assert_abs_diff_eq!(s[0].mean_mass["drift"], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(s[0].mean_mass["unstable"], 0.3, epsilon = 1e-15);
    }

    #[test]
    fn cohort_without_changes() {
        let s = cohort_aggregate(&[outcome("a", "x", 0, vec![])]).unwrap();
        assert_eq!(s[0].change_count_mean, 0.0);
        assert!(s[0].mass_distributions.is_empty());
        assert!(s[0].mean_mass.is_empty());
    }

    #[test]
    fn cohorts_grouped_and_empty_rejected() {
        let s = cohort_aggregate(&[
            outcome("a", "y", 4, vec![]),
            outcome("b", "x", 1, vec![]),
            outcome("c", "y", 2, vec![]),
        ])
        .unwrap();
        assert_eq!(s.iter().map(|c| c.cohort.as_str()).collect::<Vec<_>>(), ["x", "y"]);
        assert_eq!(s[1].change_count_mean, 3.0);
        assert!(matches!(cohort_aggregate(&[]), Err(Error::EmptyCohort(_))));
    }
}
