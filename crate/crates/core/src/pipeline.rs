// SPDX-License-Identifier: MIT OR Apache-2.0

//! End-to-end analysis of one subject and dimension, and its serialized forms.

use std::fmt::Write as _;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::clustering::{SegmentClustering, cluster_segment};
use crate::error::{Error, Result};
use crate::evolution::{
    DriftWeights, EvolutionEvent, SimilarityEdge, SimilarityParams, SimilarityWeights, build_bipartite_graph,
    classify_events, sweep_thresholds,
};
use crate::explanation::{
    ChangeReport, DescriptionSource, Period, RoutineDescription, TemplateSet, Verbosity, change_prompt,
    render_change_template, render_routine_description, routine_prompt,
};
use crate::llm::{ChatClient, LlmConfig, llm_explain};
use crate::metrics::{MassVector, mass_vector};
use crate::model::{
    BehavioralSeries, ColumnMeta, DimensionConfig, FeatureTable, PipelineParams, ValidationFlag, validate_series,
};
use crate::segmentation::{pelt, sweep_beta};

/// Significant digits kept for every float in `result.json`.
pub const FLOAT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct LlmOptions {
    pub config: LlmConfig,
    pub verbosity: Verbosity,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalysisOptions {
    pub templates: TemplateSet,
    /// Narrative generation; `None` runs offline.
    pub llm: Option<LlmOptions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub subject_id: String,
    pub dimension: String,
    pub n_days: usize,
    pub start_date: Option<NaiveDate>,
    pub end_date: Option<NaiveDate>,
    pub columns: Vec<ColumnMeta>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub imputed_rows: Vec<usize>,
    pub flags: Vec<ValidationFlag>,
    pub params: PipelineParams,
    pub template_version: u32,
    pub llm_enabled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointRecord {
    pub index: usize,
    pub date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub index: usize,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    pub clustering: SegmentClustering,
}

/// Graph and events between two consecutive segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub change_point: usize,
    pub rp_segment: usize,
    pub op_segment: usize,
    /// Every RP/OP pair, thresholded or not.
    pub similarities: Vec<SimilarityEdge>,
    pub events: Vec<EvolutionEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassRecord {
    pub change_point: usize,
    pub mass: MassVector,
    /// Share of RP days that belong to some routine.
    pub rp_clustered_fraction: f64,
    pub rp_noise_fraction: f64,
    pub op_clustered_fraction: f64,
    pub op_noise_fraction: f64,
}

/// Contents of `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub series_meta: SeriesMeta,
    pub changepoints: Vec<ChangePointRecord>,
    pub segments: Vec<SegmentRecord>,
    pub events: Vec<TransitionRecord>,
    pub mass_vectors: Vec<MassRecord>,
    pub reports: Vec<ChangeReport>,
}

fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", FLOAT_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig(n.as_f64().expect("f64 number"));
            if let Some(num) = serde_json::Number::from_f64(r) {
                *n = num;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

impl AnalysisResult {
    /// Pretty JSON with floats cut to [`FLOAT_DIGITS`] significant digits.
    pub fn to_json_string(&self) -> String {
        let mut v = serde_json::to_value(self).expect("result serializes");
        round_floats(&mut v);
        let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
        s.push('\n');
        s
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn change_point_indices(&self) -> Vec<usize> {
        self.changepoints.iter().map(|c| c.index).collect()
    }

    /// True when narratives were requested and at least one could not be produced.
    pub fn narrative_unavailable(&self) -> bool {
        self.reports.iter().any(|r| r.narrative_unavailable)
    }
}

/// Builds the encoded series and analyzes it.
pub fn analyze(
    subject_id: &str,
    config: &DimensionConfig,
    table: &FeatureTable,
    options: &AnalysisOptions,
) -> Result<AnalysisResult> {
    config.validate()?;
    let series = BehavioralSeries::build(subject_id, config, table)?;
    analyze_series(&series, config, options)
}

/// Segments, clusters, tracks, scores and explains one series.
pub fn analyze_series(
    series: &BehavioralSeries,
    config: &DimensionConfig,
    options: &AnalysisOptions,
) -> Result<AnalysisResult> {
    let params = &config.params;
    params.validate()?;
    let validation = validate_series(series, params);
    let segmentation = segment(series, params, validation.segmentation_eligible())?;

    let mut segments = Vec::with_capacity(segmentation.len());
    for (k, range) in segmentation.iter().enumerate() {
        let clustering = cluster_segment(
            series.standardized.view(),
            range.clone(),
            &series.means,
            &series.stds,
            params,
        )?;
        segments.push(SegmentRecord {
            index: k,
            start_date: series.dates[range.start],
            end_date: series.dates[range.end - 1],
            clustering,
        });
    }

    let similarity = similarity_params(series, params)?;
    let drift_weights = DriftWeights::new(params.alpha_p, params.alpha_c, params.alpha_v)?;
    let mut changepoints = Vec::new();
    let mut transitions = Vec::new();
    let mut masses = Vec::new();
    let mut reports = Vec::new();
    for k in 1..segments.len() {
        let (rp, op) = (&segments[k - 1].clustering, &segments[k].clustering);
        let cp = op.range.start;
        let graph = build_bipartite_graph(&rp.clusters, &op.clusters, &similarity)?;
        let events = classify_events(&graph, &rp.clusters, &op.clusters, params.tau_d, &drift_weights)?;
        let mass = mass_vector(&events, &rp.clusters, &op.clusters, rp.len(), op.len())?;

        let mut descriptions = describe_segment(series, config, rp, Period::Reference)?;
        descriptions.extend(describe_segment(series, config, op, Period::Observation)?);
        let blocks = events
            .iter()
            .map(|e| render_change_template(e, &descriptions, &options.templates))
            .collect::<Result<Vec<_>>>()?;

        changepoints.push(ChangePointRecord {
            index: cp,
            date: series.dates[cp],
        });
        masses.push(MassRecord {
            change_point: cp,
            mass,
            rp_clustered_fraction: rp.clustered_days() as f64 / rp.len() as f64,
            rp_noise_fraction: rp.noise_fraction(),
            op_clustered_fraction: op.clustered_days() as f64 / op.len() as f64,
            op_noise_fraction: op.noise_fraction(),
        });
        reports.push(ChangeReport {
            change_point: cp,
            change_date: Some(series.dates[cp]),
            rp_range: rp.range.clone(),
            op_range: op.range.clone(),
            mass,
            descriptions,
            blocks,
            narrative: None,
            narrative_unavailable: false,
            llm_metadata: None,
            llm_error: None,
        });
        transitions.push(TransitionRecord {
            change_point: cp,
            rp_segment: k - 1,
            op_segment: k,
            similarities: graph.similarities,
            events,
        });
    }

    if let Some(llm) = &options.llm {
        let client = ChatClient::new(llm.config.clone());
        for (report, transition) in reports.iter_mut().zip(&transitions) {
            narrate(report, &transition.events, &client, llm.verbosity, &options.templates);
        }
    }

    Ok(AnalysisResult {
        series_meta: SeriesMeta {
            subject_id: series.subject_id.clone(),
            dimension: series.dimension.clone(),
            n_days: series.len(),
            start_date: series.dates.first().copied(),
            end_date: series.dates.last().copied(),
            columns: series.columns.clone(),
            means: series.means.clone(),
            stds: series.stds.clone(),
            imputed_rows: series.imputed_rows.clone(),
            flags: validation.flags,
            params: params.clone(),
            template_version: options.templates.version,
            llm_enabled: options.llm.is_some(),
        },
        changepoints,
        segments,
        events: transitions,
        mass_vectors: masses,
        reports,
    })
}

fn segment(series: &BehavioralSeries, params: &PipelineParams, eligible: bool) -> Result<Vec<std::ops::Range<usize>>> {
    if series.is_empty() {
        return Ok(Vec::new());
    }
    if !eligible {
        return Ok(std::iter::once(0..series.len()).collect());
    }
    Ok(pelt(series.standardized.view(), params.beta, params.min_size)?.segments)
}

fn similarity_params(series: &BehavioralSeries, params: &PipelineParams) -> Result<SimilarityParams> {
    let weights = SimilarityWeights::new(params.w_c, params.w_v)?;
    Ok(SimilarityParams::new(params.tau_s, weights).with_feature_mask(series.active_columns()))
}

fn describe_segment(
    series: &BehavioralSeries,
    config: &DimensionConfig,
    clustering: &SegmentClustering,
    period: Period,
) -> Result<Vec<RoutineDescription>> {
    let dates = &series.dates[clustering.range.clone()];
    clustering
        .clusters
        .iter()
        .map(|c| render_routine_description(c, &series.columns, &config.features, dates, period))
        .collect()
}

/// Two-stage narrative: routine descriptions first, then the A/B/C interpretation.
fn narrate(
    report: &mut ChangeReport,
    events: &[EvolutionEvent],
    client: &ChatClient,
    verbosity: Verbosity,
    templates: &TemplateSet,
) {
    let mut described = report.descriptions.clone();
    for d in &mut described {
        match client.describe(&routine_prompt(d)) {
            Ok((text, _)) => {
                d.text = text;
                d.source = DescriptionSource::Llm;
            }
            Err(e) => {
                report.narrative_unavailable = true;
                report.llm_error = Some(e.to_string());
                return;
            }
        }
    }
    let blocks = events
        .iter()
        .map(|e| render_change_template(e, &described, templates))
        .collect::<Result<Vec<_>>>();
    let Ok(blocks) = blocks else {
        report.narrative_unavailable = true;
        report.llm_error = Some("description rendering failed".into());
        return;
    };
    report.descriptions = described;
    report.blocks = blocks;
    match llm_explain(&change_prompt(report, verbosity), client) {
        Ok((narrative, meta)) => {
            report.narrative = Some(narrative);
            report.llm_metadata = Some(meta);
        }
        Err(e) => {
            report.narrative_unavailable = true;
            report.llm_error = Some(e.to_string());
        }
    }
}

fn fmt_mass(x: f64) -> String {
    format!("{x:.3}")
}

/// Human-readable report for one subject and dimension.
pub fn render_report_markdown(result: &AnalysisResult) -> String {
    let meta = &result.series_meta;
    let mut md = String::new();
    let _ = writeln!(
        md,
        "# Behavioral change report: {} / {}\n",
        meta.subject_id, meta.dimension
    );
    match (meta.start_date, meta.end_date) {
        (Some(a), Some(b)) => {
            let _ = writeln!(md, "- Days analyzed: {} ({a} to {b})", meta.n_days);
        }
        _ => {
            let _ = writeln!(md, "- Days analyzed: 0");
        }
    }
    let _ = writeln!(md, "- Change points: {}", result.changepoints.len());
    let _ = writeln!(md, "- Segments: {}", result.segments.len());
    if !meta.imputed_rows.is_empty() {
        let _ = writeln!(md, "- Days with imputed values: {}", meta.imputed_rows.len());
    }
    for flag in &meta.flags {
        let _ = writeln!(md, "- Note: {flag}");
    }
    md.push('\n');

    for (k, report) in result.reports.iter().enumerate() {
        let date = report.change_date.map(|d| d.to_string()).unwrap_or_default();
        let _ = writeln!(md, "## Change {}: {date} (day {})\n", k + 1, report.change_point);
        let rp = &result.segments[k];
        let op = &result.segments[k + 1];
        let _ = writeln!(
            md,
            "Reference period: {} to {} ({} days). Observation period: {} to {} ({} days).\n",
            rp.start_date,
            rp.end_date,
            report.rp_range.len(),
            op.start_date,
            op.end_date,
            report.op_range.len()
        );
        let m = &report.mass;
        md.push_str("| Event | Mass |\n|---|---|\n");
        for (name, v) in [
            ("stable", m.m_stable),
            ("drifted", m.m_drifted),
            ("novel", m.m_novel),
            ("disappeared", m.m_disappeared),
            ("split", m.m_split),
            ("merged", m.m_merged),
        ] {
            let _ = writeln!(md, "| {name} | {} |", fmt_mass(v));
        }
        let _ = writeln!(md, "\nUnstable routine mass: {}\n", fmt_mass(m.m_unstable));
        md.push_str("### Changes\n\n");
        for block in &report.blocks {
            md.push_str(&block.text);
            md.push_str("\n\n");
        }
        if let Some(n) = &report.narrative {
            md.push_str("### Interpretation\n\n");
            let _ = writeln!(md, "**A) Global Behavioral Trend**\n\n{}\n", n.global_trend);
            let _ = writeln!(md, "**B) Habit Dynamics**\n\n{}\n", n.habit_dynamics);
            let _ = writeln!(md, "**C) Potential Implications**\n\n{}\n", n.implications);
        } else if report.narrative_unavailable {
            let reason = report.llm_error.as_deref().unwrap_or("unknown error");
            let _ = writeln!(md, "_Narrative unavailable: {reason}._\n");
        }
    }
    if result.reports.is_empty() {
        md.push_str("No behavioral change was detected.\n");
    }
    md
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Beta,
    TauS,
    TauD,
}

impl SweepParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParameter::Beta => "beta",
            SweepParameter::TauS => "tau_s",
            SweepParameter::TauD => "tau_d",
        }
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beta" => Ok(SweepParameter::Beta),
            "tau_s" => Ok(SweepParameter::TauS),
            "tau_d" => Ok(SweepParameter::TauD),
            other => Err(Error::schema("parameter", format!("unknown sweep parameter `{other}`"))),
        }
    }
}

/// One row of a sensitivity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub change_points: usize,
    /// Mean mass vector over the change points; absent for β sweeps and when none exist.
    pub mass: Option<MassVector>,
}

/// Evaluates `parameter` at each of `values`, everything else fixed at `params`.
///
/// β sweeps re-run the segmentation only. Threshold sweeps segment and cluster once and
/// re-classify every consecutive segment pair.
pub fn sweep(
    series: &BehavioralSeries,
    params: &PipelineParams,
    parameter: SweepParameter,
    values: &[f64],
) -> Result<Vec<SweepRow>> {
    params.validate()?;
    if parameter != SweepParameter::Beta && values.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::schema(parameter.as_str(), "sweep values must lie in [0, 1]"));
    }
    if parameter == SweepParameter::Beta {
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::schema("beta", "sweep values must be nonnegative"));
        }
        if !validate_series(series, params).segmentation_eligible() {
            return Ok(values
                .iter()
                .map(|&value| SweepRow {
                    value,
                    change_points: 0,
                    mass: None,
                })
                .collect());
        }
        return Ok(sweep_beta(series.standardized.view(), values, params.min_size)?
            .into_iter()
            .map(|p| SweepRow {
                value: p.beta,
                change_points: p.change_points,
                mass: None,
            })
            .collect());
    }

    let eligible = validate_series(series, params).segmentation_eligible();
    let ranges = segment(series, params, eligible)?;
    let clusterings = ranges
        .into_iter()
        .map(|r| cluster_segment(series.standardized.view(), r, &series.means, &series.stds, params))
        .collect::<Result<Vec<_>>>()?;
    let similarity = similarity_params(series, params)?;
    let drift = DriftWeights::new(params.alpha_p, params.alpha_c, params.alpha_v)?;
    let (tau_s, tau_d): (Vec<f64>, Vec<f64>) = match parameter {
        SweepParameter::TauS => (values.to_vec(), vec![params.tau_d]),
        _ => (vec![params.tau_s], values.to_vec()),
    };
    let mut sums = vec![MassVector::default(); values.len()];
    for pair in clusterings.windows(2) {
        let grid = sweep_thresholds(&pair[0], &pair[1], &tau_s, &tau_d, &similarity, &drift)?;
        for (acc, point) in sums.iter_mut().zip(grid) {
            let m = point.mass;
            acc.m_stable += m.m_stable;
            acc.m_drifted += m.m_drifted;
            acc.m_novel += m.m_novel;
            acc.m_disappeared += m.m_disappeared;
            acc.m_split += m.m_split;
            acc.m_merged += m.m_merged;
            acc.m_unstable += m.m_unstable;
        }
    }
    let n = clusterings.len().saturating_sub(1);
    Ok(values
        .iter()
        .zip(sums)
        .map(|(&value, s)| SweepRow {
            value,
            change_points: n,
            mass: (n > 0).then(|| {
                let k = n as f64;
                MassVector {
                    m_stable: s.m_stable / k,
                    m_drifted: s.m_drifted / k,
                    m_novel: s.m_novel / k,
                    m_disappeared: s.m_disappeared / k,
                    m_split: s.m_split / k,
                    m_merged: s.m_merged / k,
                    m_unstable: s.m_unstable / k,
                }
            }),
        })
        .collect())
}

/// Plot-ready CSV, one row per swept value.
pub fn sweep_csv(parameter: SweepParameter, rows: &[SweepRow]) -> String {
    let mut out = String::from(parameter.as_str());
    out.push_str(",change_points");
    if parameter != SweepParameter::Beta {
        out.push_str(",m_stable,m_drifted,m_novel,m_disappeared,m_split,m_merged,m_unstable");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{}", round_sig(r.value), r.change_points);
        if parameter != SweepParameter::Beta {
            match &r.mass {
                Some(m) => {
                    for v in [
                        m.m_stable,
                        m.m_drifted,
                        m.m_novel,
                        m.m_disappeared,
                        m.m_split,
                        m.m_merged,
                        m.m_unstable,
                    ] {
                        let _ = write!(out, ",{}", round_sig(v));
                    }
                }
                None => out.push_str(",,,,,,,"),
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::EventType;
    use crate::synthgen::{event_scenario, generate_subject};

    #[test]
    fn round_sig_examples() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(1.0 / 3.0), 0.333333333333);
        assert_eq!(round_sig(0.0), 0.0);
        assert_eq!(round_sig(123_456_789.123_456_7), 123456789.123);
    }

    #[test]
    fn sweep_parameter_parse() {
        assert_eq!("tau_s".parse::<SweepParameter>().unwrap(), SweepParameter::TauS);
        assert!("gamma".parse::<SweepParameter>().is_err());
    }

    #[test]
    fn synthetic_run_round_trips() {
        let subject = generate_subject(&event_scenario(EventType::Stable, 1)).unwrap();
        let config = subject.spec.dimension_config();
        let result = analyze("s", &config, &subject.table, &AnalysisOptions::default()).unwrap();
        let json = result.to_json_string();
        let back = AnalysisResult::from_json_str(&json).unwrap();
        assert_eq!(back.to_json_string(), json);
        let md = render_report_markdown(&result);
        assert!(md.contains("### Changes"));
        assert!(!md.contains("Interpretation"));
    }

    #[test]
    fn short_series_has_no_change_points() {
        let mut spec = event_scenario(EventType::Stable, 1);
        spec.regimes.truncate(1);
        spec.transitions.clear();
        spec.min_size = 50;
        let subject = generate_subject(&spec).unwrap();
        let result = analyze(
            "s",
            &spec.dimension_config(),
            &subject.table,
            &AnalysisOptions::default(),
        )
        .unwrap();
        assert!(result.changepoints.is_empty());
        assert_eq!(result.segments.len(), 1);
        assert!(
            result
                .series_meta
                .flags
                .iter()
                .any(|f| matches!(f, ValidationFlag::TooShort { .. }))
        );
        assert!(render_report_markdown(&result).contains("No behavioral change was detected."));
    }
}
