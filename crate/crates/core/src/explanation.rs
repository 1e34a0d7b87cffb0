// SPDX-License-Identifier: MIT OR Apache-2.0

//! Plain-language rendering of routines and their changes.
//!
//! Everything here is deterministic: the same summaries always produce the same bytes. The
//! optional narrative step lives in [`crate::llm`] and only consumes the text built here.

use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::LazyLock;

use chrono::NaiveDate;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterSummary;
use crate::encoding::{decode_cyclic, is_weekend};
use crate::error::{Error, Result};
use crate::evolution::{EventType, EvolutionEvent};
use crate::metrics::MassVector;
use crate::model::{ColumnMeta, ColumnRole, FeatureKind, FeatureSpec};

/// Built-in change templates.
pub const BUILTIN_TEMPLATES: &str = include_str!("../templates/changes_v1.txt");

/// Words that must never reach a rendered block.
pub const JARGON: [&str; 3] = ["cluster", "centroid", "drift score"];

const PLACEHOLDERS: [&str; 8] = [
    "rp_proportion",
    "op_proportion",
    "rp_description",
    "op_description",
    "rp_list",
    "op_list",
    "rp_count",
    "op_count",
];

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([a-z_]+)\}").unwrap());

pub fn contains_jargon(text: &str) -> bool {
    let lower = text.to_lowercase();
    JARGON.iter().any(|w| lower.contains(w))
}

/// Parsed template file: one text per event type.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    pub version: u32,
    templates: BTreeMap<EventType, String>,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_TEMPLATES).expect("built-in templates are valid")
    }

    /// Parses a template file. Every event type needs a section, placeholders must be known
    /// and the fixed text must be free of method jargon.
    pub fn parse(text: &str) -> Result<Self> {
        let mut version = None;
        let mut templates: BTreeMap<EventType, String> = BTreeMap::new();
        let mut current: Option<EventType> = None;
        for line in text.lines() {
            if line.starts_with('#') {
                continue;
            }
            let trimmed = line.trim();
            if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let event = EventType::ALL
                    .into_iter()
                    .find(|e| e.as_str() == name)
                    .ok_or_else(|| Error::Template(format!("unknown section `{name}`")))?;
                if templates.insert(event, String::new()).is_some() {
                    return Err(Error::Template(format!("duplicate section `{name}`")));
                }
                current = Some(event);
                continue;
            }
            match current {
                Some(e) => {
                    let body = templates.get_mut(&e).expect("section exists");
                    body.push_str(line);
                    body.push('\n');
                }
                None if trimmed.is_empty() => {}
                None => {
                    let v = trimmed
                        .strip_prefix("version")
                        .and_then(|s| s.trim_start().strip_prefix('='))
                        .and_then(|s| s.trim().parse().ok())
                        .ok_or_else(|| Error::Template(format!("unexpected line `{trimmed}`")))?;
                    version = Some(v);
                }
            }
        }
        let version = version.ok_or_else(|| Error::Template("missing version line".into()))?;
        for e in EventType::ALL {
            let body = templates
                .get_mut(&e)
                .ok_or_else(|| Error::Template(format!("missing section `{e}`")))?;
            *body = body.trim().to_string();
            for cap in PLACEHOLDER.captures_iter(body) {
                if !PLACEHOLDERS.contains(&&cap[1]) {
                    return Err(Error::Template(format!("unknown placeholder `{}` in `{e}`", &cap[1])));
                }
            }
            if contains_jargon(&PLACEHOLDER.replace_all(body, "")) {
                return Err(Error::Template(format!("section `{e}` contains method jargon")));
            }
        }
        Ok(Self { version, templates })
    }

    pub fn get(&self, event: EventType) -> &str {
        &self.templates[&event]
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Period {
    Reference,
    Observation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescriptionSource {
    Deterministic,
    Llm,
}

/// One feature of a routine in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFact {
    pub feature: String,
    pub descriptor: String,
    /// Hours for clock-time features, the configured unit otherwise; `None` when a clock
    /// time has no defined phase.
    pub value: Option<f64>,
    pub rendered: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutineDescription {
    pub period: Period,
    pub cluster_id: usize,
    pub text: String,
    pub source: DescriptionSource,
    pub coverage: f64,
    pub element_count: usize,
    pub weekend_share: f64,
    pub facts: Vec<FeatureFact>,
}

/// Clock time `HH:MM` for an hour value in `[0, 24)`.
pub fn format_clock(hours: f64) -> String {
    let minutes = (hours * 60.0).round() as i64;
    let minutes = minutes.rem_euclid(24 * 60);
    format!("{:02}:{:02}", minutes / 60, minutes % 60)
}

/// `H h M min` from one hour upwards, `M min` below.
pub fn format_duration_minutes(minutes: f64) -> String {
    let total = minutes.round() as i64;
    if total >= 60 {
        format!("{} h {} min", total / 60, total % 60)
    } else {
        format!("{total} min")
    }
}

/// Whole percent of a proportion.
pub fn format_percent(p: f64) -> String {
    format!("{}", (p * 100.0).round() as i64)
}

fn format_decimal(v: f64) -> String {
    let s = format!("{v:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

/// Renders a value in its configured unit.
pub fn format_value(value: f64, unit: &str) -> String {
    let u = unit.trim().to_lowercase();
    match u.as_str() {
        "min" | "mins" | "minute" | "minutes" => format_duration_minutes(value),
        "h" | "hour" | "hours" => format_duration_minutes(value * 60.0),
        "s" | "sec" | "secs" | "second" | "seconds" => format_duration_minutes(value / 60.0),
        "count" | "counts" => format!("{}", value.round() as i64),
        "times" | "steps" | "events" | "occurrences" | "floors" => {
            format!("{} {}", value.round() as i64, unit.trim())
        }
        "" => format_decimal(value),
        _ => format!("{} {}", format_decimal(value), unit.trim()),
    }
}

pub fn weekend_phrase(share: f64) -> &'static str {
    if share < 0.2 {
        "mostly on weekdays"
    } else if share > 0.8 {
        "mostly on weekends"
    } else {
        "on both weekdays and weekends"
    }
}

/// Deterministic description of one routine.
///
/// `columns` describes the encoded columns of `cluster.centroid_raw`; `dates` are the dates
/// of the segment the routine belongs to.
pub fn render_routine_description(
    cluster: &ClusterSummary,
    columns: &[ColumnMeta],
    specs: &[FeatureSpec],
    dates: &[NaiveDate],
    period: Period,
) -> Result<RoutineDescription> {
    if columns.len() != cluster.centroid_raw.len() {
        return Err(Error::DimensionMismatch {
            expected: columns.len(),
            actual: cluster.centroid_raw.len(),
        });
    }
    let column_of = |name: &str, role: ColumnRole| {
        columns
            .iter()
            .position(|c| c.role == role && c.source.as_deref() == Some(name))
    };
    let mut facts = Vec::with_capacity(specs.len());
    for spec in specs {
        if spec.descriptor.trim().is_empty() {
            return Err(Error::MissingDescriptor(spec.name.clone()));
        }
        let (value, rendered) = match spec.kind {
            FeatureKind::Numeric => {
                let j =
                    column_of(&spec.name, ColumnRole::Value).ok_or_else(|| Error::MissingColumn(spec.name.clone()))?;
                let v = cluster.centroid_raw[j];
                (Some(v), format_value(v, &spec.unit))
            }
            FeatureKind::CyclicTime => {
                let s = column_of(&spec.name, ColumnRole::Sin)
                    .ok_or_else(|| Error::MissingColumn(format!("{}_sin", spec.name)))?;
                let c = column_of(&spec.name, ColumnRole::Cos)
                    .ok_or_else(|| Error::MissingColumn(format!("{}_cos", spec.name)))?;
                match decode_cyclic(cluster.centroid_raw[s], cluster.centroid_raw[c]) {
                    Ok(h) => (Some(h), format_clock(h)),
                    Err(_) => (None, "no consistent time of day".to_string()),
                }
            }
            FeatureKind::BinaryContext => {
                let j = column_of(&spec.name, ColumnRole::Context)
                    .ok_or_else(|| Error::MissingColumn(spec.name.clone()))?;
                let v = cluster.centroid_raw[j];
                (Some(v), format!("on {}% of days", format_percent(v)))
            }
        };
        facts.push(FeatureFact {
            feature: spec.name.clone(),
            descriptor: spec.descriptor.trim().to_string(),
            value,
            rendered,
        });
    }

    let weekend_days = cluster
        .member_indices
        .iter()
        .filter(|&&i| dates.get(i).is_some_and(|d| is_weekend(*d)))
        .count();
    let weekend_share = if cluster.size == 0 {
        0.0
    } else {
        weekend_days as f64 / cluster.size as f64
    };

    let mut text = String::new();
    for f in &facts {
        text.push_str(&format!("{}: {}. ", f.descriptor, f.rendered));
    }
    text.push_str(&format!(
        "It occurs on {} days ({}% of the period), {}.",
        cluster.size,
        format_percent(cluster.proportion),
        weekend_phrase(weekend_share)
    ));

    Ok(RoutineDescription {
        period,
        cluster_id: cluster.cluster_id,
        text,
        source: DescriptionSource::Deterministic,
        coverage: cluster.proportion,
        element_count: cluster.size,
        weekend_share,
        facts,
    })
}

/// One filled change template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateBlock {
    pub event_type: EventType,
    pub rp_clusters: Vec<usize>,
    pub op_clusters: Vec<usize>,
    pub text: String,
}

fn lookup(descriptions: &[RoutineDescription], period: Period, id: usize) -> Result<&RoutineDescription> {
    descriptions
        .iter()
        .find(|d| d.period == period && d.cluster_id == id)
        .ok_or_else(|| {
            let side = match period {
                Period::Reference => "reference",
                Period::Observation => "observation",
            };
            Error::MissingDescription(format!("{side} routine {id}"))
        })
}

fn list(items: &[&RoutineDescription]) -> String {
    items
        .iter()
        .map(|d| format!("- (proportion {}%) {}", format_percent(d.coverage), d.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Fills the template for `event` with the referenced routine descriptions.
pub fn render_change_template(
    event: &EvolutionEvent,
    descriptions: &[RoutineDescription],
    templates: &TemplateSet,
) -> Result<TemplateBlock> {
    let rp = event
        .rp_clusters
        .iter()
        .map(|&i| lookup(descriptions, Period::Reference, i))
        .collect::<Result<Vec<_>>>()?;
    let op = event
        .op_clusters
        .iter()
        .map(|&j| lookup(descriptions, Period::Observation, j))
        .collect::<Result<Vec<_>>>()?;

    let mut values: BTreeMap<&str, String> = BTreeMap::new();
    values.insert("rp_count", rp.len().to_string());
    values.insert("op_count", op.len().to_string());
    values.insert("rp_list", list(&rp));
    values.insert("op_list", list(&op));
    if let [d] = rp.as_slice() {
        values.insert("rp_proportion", format_percent(d.coverage));
        values.insert("rp_description", d.text.clone());
    }
    if let [d] = op.as_slice() {
        values.insert("op_proportion", format_percent(d.coverage));
        values.insert("op_description", d.text.clone());
    }

    let template = templates.get(event.event_type);
    let mut missing = None;
    let text = PLACEHOLDER.replace_all(template, |cap: &regex::Captures| match values.get(&cap[1]) {
        Some(v) => v.clone(),
        None => {
            missing.get_or_insert_with(|| cap[1].to_string());
            String::new()
        }
    });
    if let Some(name) = missing {
        return Err(Error::Template(format!(
            "placeholder `{name}` has no value for a {} event",
            event.event_type
        )));
    }
    Ok(TemplateBlock {
        event_type: event.event_type,
        rp_clusters: event.rp_clusters.clone(),
        op_clusters: event.op_clusters.clone(),
        text: text.into_owned(),
    })
}

/// The three parts of an interpretation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Narrative {
    pub global_trend: String,
    pub habit_dynamics: String,
    pub implications: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmMetadata {
    pub model: String,
    pub latency_ms: u64,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

/// Everything reported for one change point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeReport {
    pub change_point: usize,
    pub change_date: Option<NaiveDate>,
    pub rp_range: Range<usize>,
    pub op_range: Range<usize>,
    pub mass: MassVector,
    pub descriptions: Vec<RoutineDescription>,
    pub blocks: Vec<TemplateBlock>,
    pub narrative: Option<Narrative>,
    pub narrative_unavailable: bool,
    pub llm_metadata: Option<LlmMetadata>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llm_error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptStage {
    RoutineDescription,
    ChangeInterpretation,
}

/// Level of detail requested for Part B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verbosity {
    #[default]
    Detailed,
    Brief,
}

/// Prompt turning one routine's values into a short description.
pub fn routine_prompt(desc: &RoutineDescription) -> String {
    let mut p = String::from(
        "Describe the following daily routine of a person in plain natural language. \
         Use only the information given, avoiding inferring information not explicitly present \
         in the numbers. Keep the description short and avoid redundancy. Do not mention \
         analysis methods or technical terms.\n\nFeature values:\n",
    );
    for f in &desc.facts {
        p.push_str(&format!("- {}: {}\n", f.descriptor, f.rendered));
    }
    p.push_str(&format!(
        "\nNumber of days with this routine: {}\nShare of the period: {}%\nOccurrence: {}\n",
        desc.element_count,
        format_percent(desc.coverage),
        weekend_phrase(desc.weekend_share)
    ));
    p
}

/// Prompt asking for the three-part interpretation of all changes at one change point.
pub fn change_prompt(report: &ChangeReport, verbosity: Verbosity) -> String {
    let mut p = String::from(
        "The following texts describe how the daily routines of a person changed between a \
         reference period and the subsequent observation period.\n\n",
    );
    for b in &report.blocks {
        p.push_str(&b.text);
        p.push_str("\n\n");
    }
    p.push_str(
        "Write an assessment with exactly three labeled sections:\n\
         A) Global Behavioral Trend: a short summary of how routines changed overall.\n\
         B) Habit Dynamics: an objective description of how each routine evolved across periods, \
         focusing on net functional changes such as gain, loss or compensation.\n\
         C) Potential Implications: whether the observed changes are consistent with \
         resilience or compensation, simplification, or dysregulation of routines.\n\n\
         Use cautious language, avoiding drawing definitive conclusions about the person's \
         health status. Do not mention analysis methods or technical terms.\n",
    );
    if verbosity == Verbosity::Brief {
        p.push_str("Keep section B brief and high level, without detailed statistics.\n");
    }
    p
}

/// Prompts for one stage: one per routine for descriptions, a single one for interpretation.
pub fn build_llm_prompt(report: &ChangeReport, stage: PromptStage, verbosity: Verbosity) -> Vec<String> {
    match stage {
        PromptStage::RoutineDescription => report.descriptions.iter().map(routine_prompt).collect(),
        PromptStage::ChangeInterpretation => vec![change_prompt(report, verbosity)],
    }
}
