// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic subjects with known change points and scripted routine reorganizations.
//!
//! A scenario is a sequence of regimes. Each regime assigns every weekday to exactly one
//! routine, and each routine draws its days as `mean + noise * N(0, 1)` per feature. Regime
//! boundaries are the true change points; the expected events at each boundary are declared
//! alongside the regimes.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::EventType;
use crate::model::{DimensionConfig, FeatureKind, FeatureSpec, FeatureTable, Granularity, PipelineParams};
use crate::pipeline::AnalysisResult;

/// Weekday indices, Monday = 0.
pub const WEEKDAYS: [u8; 5] = [0, 1, 2, 3, 4];
pub const WEEKEND: [u8; 2] = [5, 6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutineSpec {
    pub id: String,
    pub mean: Vec<f64>,
    /// Per-feature standard deviation.
    pub noise: Vec<f64>,
    /// Days of the week covered, Monday = 0.
    pub weekdays: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    pub duration: usize,
    pub routines: Vec<RoutineSpec>,
}

/// An event expected at a regime boundary, in terms of routine ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedEvent {
    pub event: EventType,
    #[serde(default)]
    pub rp: Vec<String>,
    #[serde(default)]
    pub op: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSpec {
    #[serde(default)]
    pub events: Vec<ExpectedEvent>,
}

fn default_subject() -> String {
    "synthetic".into()
}

fn default_dimension() -> String {
    "synthetic".into()
}

/// Change penalty used by the built-in scenarios.
///
/// Costs are measured on standardized columns, so a handful of synthetic features
/// gains far less from a true split than a full sensor dimension does.
pub const SYNTHETIC_BETA: f64 = 15.0;

fn synthetic_params() -> PipelineParams {
    PipelineParams {
        beta: SYNTHETIC_BETA,
        ..PipelineParams::default()
    }
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    #[serde(default = "default_subject")]
    pub subject_id: String,
    #[serde(default = "default_dimension")]
    pub dimension: String,
    #[serde(default = "default_start")]
    pub start_date: NaiveDate,
    pub n_features: usize,
    /// Feature definitions; numeric features `f0..` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<FeatureSpec>>,
    /// Checked against the regime durations when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_days: Option<usize>,
    pub min_size: usize,
    /// Pipeline parameters written into the generated configuration; `min_size` overrides
    /// their own value.
    #[serde(default)]
    pub params: PipelineParams,
    pub regimes: Vec<RegimeSpec>,
    /// One entry per regime boundary.
    #[serde(default)]
    pub transitions: Vec<TransitionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionTruth {
    pub change_point: usize,
    pub events: Vec<ExpectedEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub change_points: Vec<usize>,
    pub transitions: Vec<TransitionTruth>,
    /// Routine id that generated each day.
    pub day_routines: Vec<String>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidScenario(msg.into())
}

impl ScenarioSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn total_len(&self) -> usize {
        self.regimes.iter().map(|r| r.duration).sum()
    }

    pub fn feature_specs(&self) -> Vec<FeatureSpec> {
        self.features.clone().unwrap_or_else(|| {
            (0..self.n_features)
                .map(|i| FeatureSpec {
                    name: format!("f{i}"),
                    kind: FeatureKind::Numeric,
                    unit: String::new(),
                    descriptor: format!("Feature {i}"),
                })
                .collect()
        })
    }

    /// Configuration under which the generated table should be analyzed.
    pub fn dimension_config(&self) -> DimensionConfig {
        DimensionConfig {
            dimension_name: self.dimension.clone(),
            granularity: Granularity::Day,
            features: self.feature_specs(),
            params: PipelineParams {
                min_size: self.min_size,
                ..self.params.clone()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.regimes.is_empty() {
            return Err(invalid("no regimes"));
        }
        let features = self.feature_specs();
        if features.len() != self.n_features {
            return Err(invalid(format!(
                "{} feature definitions for n_features = {}",
                features.len(),
                self.n_features
            )));
        }
        if features.iter().any(|f| f.kind == FeatureKind::BinaryContext) {
            return Err(invalid("binary context features cannot be generated"));
        }
        self.dimension_config().validate()?;
        if let Some(t) = self.total_days {
            if t != self.total_len() {
                return Err(invalid(format!(
                    "total_days {t} differs from regime sum {}",
                    self.total_len()
                )));
            }
        }
        if !self.transitions.is_empty() && self.transitions.len() + 1 != self.regimes.len() {
            return Err(invalid(format!(
                "{} transitions for {} regimes",
                self.transitions.len(),
                self.regimes.len()
            )));
        }
        for (r, regime) in self.regimes.iter().enumerate() {
            if regime.duration < self.min_size {
                return Err(invalid(format!(
                    "regime {r} lasts {} days, below min_size {}",
                    regime.duration, self.min_size
                )));
            }
            let mut ids = BTreeSet::new();
            let mut covered = [0usize; 7];
            for routine in &regime.routines {
                if !ids.insert(routine.id.as_str()) {
                    return Err(invalid(format!("duplicate routine `{}` in regime {r}", routine.id)));
                }
                if routine.mean.len() != self.n_features || routine.noise.len() != self.n_features {
                    return Err(Error::DimensionMismatch {
                        expected: self.n_features,
                        actual: routine.mean.len().min(routine.noise.len()),
                    });
                }
                if routine.mean.iter().chain(&routine.noise).any(|v| !v.is_finite())
                    || routine.noise.iter().any(|&s| s < 0.0)
                {
                    return Err(invalid(format!("routine `{}` has invalid mean or noise", routine.id)));
                }
                for &d in &routine.weekdays {
                    if d > 6 {
                        return Err(Error::InfeasibleOccupancy(format!(
                            "routine `{}` names weekday {d}",
                            routine.id
                        )));
                    }
                    covered[d as usize] += 1;
                }
            }
            if let Some(d) = covered.iter().position(|&c| c != 1) {
                return Err(Error::InfeasibleOccupancy(format!(
                    "weekday {d} is covered by {} routines in regime {r}",
                    covered[d]
                )));
            }
        }
        for (k, t) in self.transitions.iter().enumerate() {
            let rp: BTreeSet<&str> = self.regimes[k].routines.iter().map(|r| r.id.as_str()).collect();
            let op: BTreeSet<&str> = self.regimes[k + 1].routines.iter().map(|r| r.id.as_str()).collect();
            for e in &t.events {
                let arity_ok = match e.event {
                    EventType::Stable | EventType::Drift => e.rp.len() == 1 && e.op.len() == 1,
                    EventType::Novel => e.rp.is_empty() && e.op.len() == 1,
                    EventType::Disappeared => e.rp.len() == 1 && e.op.is_empty(),
                    EventType::Split => e.rp.len() == 1 && e.op.len() >= 2,
                    EventType::Merge => e.rp.len() >= 2 && e.op.len() == 1,
                };
                if !arity_ok {
                    return Err(invalid(format!("transition {k}: wrong routine count for {}", e.event)));
                }
                if let Some(id) = e.rp.iter().find(|id| !rp.contains(id.as_str())) {
                    return Err(invalid(format!("transition {k}: unknown reference routine `{id}`")));
                }
                if let Some(id) = e.op.iter().find(|id| !op.contains(id.as_str())) {
                    return Err(invalid(format!("transition {k}: unknown observation routine `{id}`")));
                }
            }
        }
        Ok(())
    }
}

/// Synthetic daily table and the truth it was generated from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSubject {
    pub spec: ScenarioSpec,
    pub table: FeatureTable,
    pub truth: GroundTruth,
}

impl SyntheticSubject {
    pub fn csv(&self) -> String {
        self.table.to_csv_string()
    }
}

/// Draws one subject. Deterministic in `spec.seed`.
pub fn generate_subject(spec: &ScenarioSpec) -> Result<SyntheticSubject> {
    spec.validate()?;
    let features = spec.feature_specs();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = spec.total_len();
    let mut dates = Vec::with_capacity(total);
    let mut rows = Vec::with_capacity(total);
    let mut day_routines = Vec::with_capacity(total);
    let mut change_points = Vec::new();
    let mut t = 0usize;
    for (r, regime) in spec.regimes.iter().enumerate() {
        if r > 0 {
            change_points.push(t);
        }
        for _ in 0..regime.duration {
            let date = spec.start_date + Days::new(t as u64);
            let wd = date.weekday().num_days_from_monday() as u8;
            let routine = regime
                .routines
                .iter()
                .find(|x| x.weekdays.contains(&wd))
                .expect("validated occupancy");
            let row = features
                .iter()
                .zip(routine.mean.iter().zip(&routine.noise))
                .map(|(f, (&m, &s))| {
                    let z: f64 = rng.sample(StandardNormal);
                    let v = m + s * z;
                    Some(if f.kind == FeatureKind::CyclicTime {
                        v.rem_euclid(24.0) % 24.0
                    } else {
                        v
                    })
                })
                .collect();
            dates.push(date);
            rows.push(row);
            day_routines.push(routine.id.clone());
            t += 1;
        }
    }
    let transitions = change_points
        .iter()
        .enumerate()
        .map(|(k, &cp)| TransitionTruth {
            change_point: cp,
            events: spec.transitions.get(k).map(|t| t.events.clone()).unwrap_or_default(),
        })
        .collect();
    Ok(SyntheticSubject {
        spec: spec.clone(),
        table: FeatureTable {
            dates,
            columns: features.iter().map(|f| f.name.clone()).collect(),
            rows,
        },
        truth: GroundTruth {
            change_points,
            transitions,
            day_routines,
        },
    })
}

fn routine(id: &str, mean: Vec<f64>, noise: f64, weekdays: &[u8]) -> RoutineSpec {
    RoutineSpec {
        id: id.into(),
        noise: vec![noise; mean.len()],
        mean,
        weekdays: weekdays.to_vec(),
    }
}

fn unit_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Knobs for [`random_scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomScenarioConfig {
    pub n_features: usize,
    pub min_size: usize,
    pub noise: f64,
    /// Size of the shift between consecutive regimes, in units of `noise`.
    pub separation: f64,
    /// Inclusive range of regime durations.
    pub min_duration: usize,
    pub max_duration: usize,
}

impl Default for RandomScenarioConfig {
    /// The "easy" setting: separation six times the noise, `min_size` 30.
    fn default() -> Self {
        Self {
            n_features: 3,
            min_size: 30,
            noise: 1.0,
            separation: 6.0,
            min_duration: 40,
            max_duration: 80,
        }
    }
}

/// Weekday and weekend routine per regime; every boundary moves both routines by
/// `separation * noise` in random directions.
pub fn random_scenario(seed: u64, n_changes: usize, cfg: &RandomScenarioConfig) -> ScenarioSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cfg.n_features;
    let shift = cfg.separation * cfg.noise;
    let mut weekday: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0) * shift).collect();
    let mut weekend: Vec<f64> = weekday
        .iter()
        .zip(unit_direction(&mut rng, n))
        .map(|(m, d)| m + shift * d)
        .collect();
    let mut regimes = Vec::with_capacity(n_changes + 1);
    for r in 0..=n_changes {
        if r > 0 {
            let dir = unit_direction(&mut rng, n);
            for mean in [&mut weekday, &mut weekend] {
                for (m, d) in mean.iter_mut().zip(&dir) {
                    *m += shift * d;
                }
            }
        }
        regimes.push(RegimeSpec {
            duration: rng.random_range(cfg.min_duration..=cfg.max_duration),
            routines: vec![
                routine(&format!("weekday{r}"), weekday.clone(), cfg.noise, &WEEKDAYS),
                routine(&format!("weekend{r}"), weekend.clone(), cfg.noise, &WEEKEND),
            ],
        });
    }
    ScenarioSpec {
        seed,
        subject_id: format!("random-{seed}"),
        dimension: default_dimension(),
        start_date: default_start(),
        n_features: n,
        features: None,
        total_days: None,
        min_size: cfg.min_size,
        params: synthetic_params(),
        regimes,
        transitions: vec![TransitionSpec::default(); n_changes],
    }
}

/// Two-regime scenario whose boundary scripts one reorganization of the weekday routine.
///
/// The weekend routine is replaced at the boundary in every scenario, which gives the
/// segmentation a strong signal; the expected events cover only the weekday routines.
/// Split and merge use their own layout: the weekend moves along the first feature only,
/// the second feature carries a wide weekday routine and its two tight halves, and the
/// regimes are four times as long so the wide routine's mean is well estimated. They also
/// use a larger change penalty, since the wide routine's spread dominates its segment.
pub fn event_scenario(event: EventType, seed: u64) -> ScenarioSpec {
    const S: f64 = 0.1;
    let base = vec![0.0, 0.0];
    let reshapes = matches!(event, EventType::Split | EventType::Merge);
    let (weekend_rp, weekend_op, duration) = if reshapes {
        (
            routine("weekend_a", vec![8.0, 0.0], S, &WEEKEND),
            routine("weekend_b", vec![-8.0, 0.0], S, &WEEKEND),
            280,
        )
    } else {
        (
            routine("weekend_a", vec![8.0, 8.0], S, &WEEKEND),
            routine("weekend_b", vec![8.0, -8.0], S, &WEEKEND),
            70,
        )
    };
    let mon_thu: [u8; 4] = [0, 1, 2, 3];
    // A spread-out weekday routine whose two halves tighten around either side of it.
    let broad = RoutineSpec {
        noise: vec![S, 3.0],
        ..routine("weekday", base.clone(), S, &WEEKDAYS)
    };
    let early = routine("early", vec![0.0, -0.85], S, &[0, 1, 2]);
    let late = routine("late", vec![0.0, 0.85], S, &[3, 4]);
    let (rp, op, expected) = match event {
        EventType::Stable => (
            vec![routine("weekday", base.clone(), S, &WEEKDAYS)],
            vec![routine("weekday", base.clone(), S, &WEEKDAYS)],
            ExpectedEvent {
                event,
                rp: vec!["weekday".into()],
                op: vec!["weekday".into()],
            },
        ),
        EventType::Drift => (
            vec![routine("weekday", base.clone(), S, &WEEKDAYS)],
            vec![routine("weekday", vec![0.05, 0.05], 4.0 * S, &WEEKDAYS)],
            ExpectedEvent {
                event,
                rp: vec!["weekday".into()],
                op: vec!["weekday".into()],
            },
        ),
        EventType::Novel => (
            vec![routine("weekday", base.clone(), S, &WEEKDAYS)],
            vec![
                routine("weekday", base.clone(), S, &mon_thu),
                routine("friday", vec![-6.0, 4.0], S, &[4]),
            ],
            ExpectedEvent {
                event,
                rp: vec![],
                op: vec!["friday".into()],
            },
        ),
        EventType::Disappeared => (
            vec![
                routine("weekday", base.clone(), S, &mon_thu),
                routine("friday", vec![-6.0, 4.0], S, &[4]),
            ],
            vec![routine("weekday", base.clone(), S, &WEEKDAYS)],
            ExpectedEvent {
                event,
                rp: vec!["friday".into()],
                op: vec![],
            },
        ),
        EventType::Split => (
            vec![broad.clone()],
            vec![early.clone(), late.clone()],
            ExpectedEvent {
                event,
                rp: vec!["weekday".into()],
                op: vec!["early".into(), "late".into()],
            },
        ),
        EventType::Merge => (
            vec![early.clone(), late.clone()],
            vec![broad.clone()],
            ExpectedEvent {
                event,
                rp: vec!["early".into(), "late".into()],
                op: vec!["weekday".into()],
            },
        ),
    };
    let regime = |mut routines: Vec<RoutineSpec>, weekend: RoutineSpec| {
        routines.push(weekend);
        RegimeSpec { duration, routines }
    };
    ScenarioSpec {
        seed,
        subject_id: format!("{event}-{seed}"),
        dimension: default_dimension(),
        start_date: default_start(),
        n_features: 2,
        features: None,
        total_days: None,
        min_size: 30,
        params: PipelineParams {
            beta: if reshapes { 40.0 } else { SYNTHETIC_BETA },
            ..PipelineParams::default()
        },
        regimes: vec![regime(rp, weekend_rp), regime(op, weekend_op)],
        transitions: vec![TransitionSpec { events: vec![expected] }],
    }
}

/// Settings shared by every subject of a synthetic cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortTemplate {
    pub total_days: usize,
    /// Expected number of change points per subject at multiplier 1.
    pub base_changes: f64,
    pub scenario: RandomScenarioConfig,
}

impl Default for CohortTemplate {
    fn default() -> Self {
        Self {
            total_days: 360,
            base_changes: 1.5,
            scenario: RandomScenarioConfig::default(),
        }
    }
}

/// Draws `n_subjects` subjects whose expected change count is `base_changes * multiplier`.
///
/// Counts are Poisson draws, capped so every regime keeps at least `min_duration` days.
/// Subject seeds are derived from `seed`.
pub fn generate_cohort(
    template: &CohortTemplate,
    n_subjects: usize,
    change_rate_multiplier: f64,
    seed: u64,
) -> Result<Vec<SyntheticSubject>> {
    let rate = template.base_changes * change_rate_multiplier;
    if !(rate.is_finite() && rate >= 0.0) {
        return Err(invalid("change rate must be finite and nonnegative"));
    }
    let cfg = &template.scenario;
    if cfg.min_duration < cfg.min_size || cfg.min_duration == 0 {
        return Err(invalid("min_duration must be at least min_size"));
    }
    let max_changes = (template.total_days / cfg.min_duration).saturating_sub(1);
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let poisson = (rate > 0.0).then(|| Poisson::new(rate).expect("positive rate"));
    (0..n_subjects)
        .map(|i| {
            let subject_seed: u64 = master.random();
            let k = poisson
                .as_ref()
                .map_or(0, |p| p.sample(&mut master) as usize)
                .min(max_changes);
            let mut spec = random_scenario(subject_seed, k, cfg);
            fit_durations(&mut spec, template.total_days, cfg.min_duration, subject_seed);
            spec.subject_id = format!("subject{i:03}");
            generate_subject(&spec)
        })
        .collect()
}

/// Rescales regime durations to sum to `total`, each at least `min`.
fn fit_durations(spec: &mut ScenarioSpec, total: usize, min: usize, seed: u64) {
    let k = spec.regimes.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let spare = total - k * min;
    let mut cuts: Vec<usize> = (0..k - 1).map(|_| rng.random_range(0..=spare)).collect();
    cuts.sort_unstable();
    let mut prev = 0;
    for (r, regime) in spec.regimes.iter_mut().enumerate() {
        let next = if r + 1 < k { cuts[r] } else { spare };
        regime.duration = min + next - prev;
        prev = next;
    }
}

/// Majority generating routine of each detected group of days.
///
/// `members` are day indices relative to `offset`. Returns `None` when no routine holds a
/// strict majority.
pub fn dominant_routine<'a>(truth: &'a GroundTruth, offset: usize, members: &[usize]) -> Option<&'a str> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for &m in members {
        *counts.entry(truth.day_routines[offset + m].as_str()).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by_key(|&(_, c)| c)
        .filter(|&(_, c)| 2 * c > members.len())
        .map(|(id, _)| id)
}

/// Change points may land this many days from the truth and still match.
pub const CHANGE_POINT_SLACK: usize = 7;

/// Whether `result` contains every scripted event of `truth`.
///
/// Detected change points must pair one-to-one with the true ones within
/// [`CHANGE_POINT_SLACK`]. Clusters are named after their majority routine, and each expected
/// event must appear with exactly the expected routines on both sides.
pub fn expected_events_recovered(truth: &GroundTruth, result: &AnalysisResult) -> bool {
    let found = result.change_point_indices();
    if found.len() != truth.change_points.len() {
        return false;
    }
    truth
        .transitions
        .iter()
        .zip(&result.events)
        .all(|(expected, transition)| {
            if transition.change_point.abs_diff(expected.change_point) > CHANGE_POINT_SLACK {
                return false;
            }
            let names = |segment: usize, ids: &[usize]| -> Option<BTreeSet<String>> {
                let clustering = &result.segments[segment].clustering;
                ids.iter()
                    .map(|&k| {
                        let members = &clustering.clusters.get(k)?.member_indices;
                        dominant_routine(truth, clustering.range.start, members).map(str::to_string)
                    })
                    .collect()
            };
            expected.events.iter().all(|want| {
                let rp: BTreeSet<String> = want.rp.iter().cloned().collect();
                let op: BTreeSet<String> = want.op.iter().cloned().collect();
                transition.events.iter().any(|e| {
                    e.event_type == want.event
                        && names(transition.rp_segment, &e.rp_clusters).as_ref() == Some(&rp)
                        && names(transition.op_segment, &e.op_clusters).as_ref() == Some(&op)
                })
            })
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_regime(shift: f64) -> ScenarioSpec {
        ScenarioSpec {
            seed: 3,
            subject_id: "s".into(),
            dimension: "d".into(),
            start_date: default_start(),
            n_features: 1,
            features: None,
            total_days: Some(80),
            min_size: 30,
            params: PipelineParams::default(),
            regimes: vec![
                RegimeSpec {
                    duration: 40,
                    routines: vec![routine("all", vec![0.0], 1.0, &[0, 1, 2, 3, 4, 5, 6])],
                },
                RegimeSpec {
                    duration: 40,
                    routines: vec![routine("all", vec![shift], 1.0, &[0, 1, 2, 3, 4, 5, 6])],
                },
            ],
            transitions: vec![],
        }
    }

    #[test]
    fn single_shift_truth() {
        let s = generate_subject(&two_regime(5.0)).unwrap();
        assert_eq!(s.truth.change_points, vec![40]);
        assert_eq!(s.table.len(), 80);
        assert_eq!(s.truth.day_routines.len(), 80);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate_subject(&two_regime(5.0)).unwrap().csv();
        let b = generate_subject(&two_regime(5.0)).unwrap().csv();
        assert_eq!(a, b);
        let mut other = two_regime(5.0);
        other.seed = 4;
        assert_ne!(a, generate_subject(&other).unwrap().csv());
    }

    #[test]
    fn infeasible_occupancy() {
        let mut s = two_regime(1.0);
        s.regimes[0].routines[0].weekdays = vec![0, 1, 2];
        assert!(matches!(generate_subject(&s), Err(Error::InfeasibleOccupancy(_))));
        let mut s = two_regime(1.0);
        s.regimes[1].routines.push(routine("extra", vec![0.0], 1.0, &[3]));
        assert!(matches!(generate_subject(&s), Err(Error::InfeasibleOccupancy(_))));
    }

    #[test]
    fn invalid_specs() {
        let mut s = two_regime(1.0);
        s.regimes[0].duration = 10;
        s.total_days = None;
        assert!(matches!(s.validate(), Err(Error::InvalidScenario(_))));
        let mut s = two_regime(1.0);
        s.total_days = Some(81);
        assert!(s.validate().is_err());
    }

    #[test]
    fn split_scenario_truth() {
        let s = event_scenario(EventType::Split, 1);
        s.validate().unwrap();
        let e = &s.transitions[0].events[0];
        assert_eq!(e.event, EventType::Split);
        assert_eq!((e.rp.len(), e.op.len()), (1, 2));
        for t in EventType::ALL {
            generate_subject(&event_scenario(t, 2)).unwrap();
        }
    }

    #[test]
    fn json_round_trip() {
        let s = event_scenario(EventType::Merge, 9);
        assert_eq!(ScenarioSpec::from_json_str(&s.to_json_string()).unwrap(), s);
    }

    #[test]
    fn cohort_scaling_and_seeds() {
        let t = CohortTemplate::default();
        let one = generate_cohort(&t, 1, 1.0, 5).unwrap();
        assert_eq!(one.len(), 1);
        let a = generate_cohort(&t, 200, 1.0, 5).unwrap();
        let b = generate_cohort(&t, 200, 2.0, 5).unwrap();
        let mean = |c: &[SyntheticSubject]| {
            c.iter().map(|s| s.truth.change_points.len()).sum::<usize>() as f64 / c.len() as f64
        };
        let ratio = mean(&b) / mean(&a);
        assert!((1.6..2.4).contains(&ratio), "ratio {ratio}");
        assert_eq!(
            generate_cohort(&t, 3, 1.0, 5).unwrap(),
            generate_cohort(&t, 3, 1.0, 5).unwrap()
        );
        for s in &a {
            assert_eq!(s.table.len(), t.total_days);
        }
    }

    #[test]
    fn dominant_routine_majority() {
        let truth = GroundTruth {
            change_points: vec![],
            transitions: vec![],
            day_routines: ["a", "a", "b", "a", "b", "b"].map(String::from).to_vec(),
        };
        assert_eq!(dominant_routine(&truth, 0, &[0, 1, 2]), Some("a"));
        assert_eq!(dominant_routine(&truth, 2, &[0, 2]), Some("b"));
        assert_eq!(dominant_routine(&truth, 0, &[1, 2]), None);
    }
}
