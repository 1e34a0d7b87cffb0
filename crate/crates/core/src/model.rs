// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dimension configuration, daily feature tables and the encoded behavioral series.

use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::encoding::{self, ContextMode};
use crate::error::{Error, Result};

const WEIGHT_TOLERANCE: f64 = 1e-12;
const DATE_FORMAT: &str = "%Y-%m-%d";

/// Calendar gaps of at least this many missing days are reported.
pub const GAP_REPORT_DAYS: i64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Numeric,
    CyclicTime,
    BinaryContext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    #[default]
    Day,
}

/// One behavioral feature and its plain-language meaning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default)]
    pub unit: String,
    #[serde(default)]
    pub descriptor: String,
}

/// Search grid for the DBSCAN radius, inclusive on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for EpsGrid {
    fn default() -> Self {
        Self {
            lo: 0.05,
            hi: 0.60,
            step: 0.01,
        }
    }
}

impl EpsGrid {
    /// Grid values computed as `lo + i * step` so they do not accumulate rounding error.
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.lo + i as f64 * self.step).collect()
    }
}

/// Tunable parameters of the whole pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    /// Penalty per change point.
    pub beta: f64,
    /// Minimum segment length in observed days.
    pub min_size: usize,
    pub tau_s: f64,
    pub tau_d: f64,
    pub w_c: f64,
    pub w_v: f64,
    pub alpha_p: f64,
    pub alpha_c: f64,
    pub alpha_v: f64,
    pub eps_grid: EpsGrid,
    pub min_samples: usize,
    pub max_noise_fraction: f64,
    pub context: ContextMode,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            beta: 60.0,
            min_size: 90,
            tau_s: 0.5,
            tau_d: 0.25,
            w_c: 0.7,
            w_v: 0.3,
            alpha_p: 1.0 / 3.0,
            alpha_c: 1.0 / 3.0,
            alpha_v: 1.0 / 3.0,
            eps_grid: EpsGrid::default(),
            min_samples: 5,
            max_noise_fraction: 0.5,
            context: ContextMode::IsWeekend,
        }
    }
}

fn unit_interval(field: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::schema(field, format!("{value} is outside [0, 1]")))
    }
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::schema("params.beta", "must be a nonnegative real"));
        }
        if self.min_size == 0 {
            return Err(Error::schema("params.min_size", "must be positive"));
        }
        if self.min_samples == 0 {
            return Err(Error::schema("params.min_samples", "must be positive"));
        }
        for (field, value) in [
            ("params.tau_s", self.tau_s),
            ("params.tau_d", self.tau_d),
            ("params.w_c", self.w_c),
            ("params.w_v", self.w_v),
            ("params.alpha_p", self.alpha_p),
            ("params.alpha_c", self.alpha_c),
            ("params.alpha_v", self.alpha_v),
        ] {
            unit_interval(field, value)?;
        }
        if (self.w_c + self.w_v - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::WeightSum("similarity"));
        }
        if (self.alpha_p + self.alpha_c + self.alpha_v - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(Error::WeightSum("drift"));
        }
        let g = self.eps_grid;
        if !(g.lo > 0.0 && g.hi >= g.lo && g.step > 0.0 && g.hi.is_finite()) {
            return Err(Error::schema("params.eps_grid", "requires 0 < lo <= hi and step > 0"));
        }
        if !(self.max_noise_fraction > 0.0 && self.max_noise_fraction <= 1.0) {
            return Err(Error::schema("params.max_noise_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// A behavioral dimension: its features, their descriptors and the pipeline parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionConfig {
    #[serde(rename = "dimension")]
    pub dimension_name: String,
    #[serde(default)]
    pub granularity: Granularity,
    pub features: Vec<FeatureSpec>,
    #[serde(default)]
    pub params: PipelineParams,
}

impl DimensionConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: DimensionConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension_name.trim().is_empty() {
            return Err(Error::schema("dimension", "must be non-empty"));
        }
        if self.features.is_empty() {
            return Err(Error::schema("features", "at least one feature is required"));
        }
        let mut seen = HashSet::new();
        for (i, f) in self.features.iter().enumerate() {
            if f.name.trim().is_empty() {
                return Err(Error::schema(format!("features[{i}].name"), "must be non-empty"));
            }
            if f.name == "date" {
                return Err(Error::schema(format!("features[{i}].name"), "`date` is reserved"));
            }
            if !seen.insert(f.name.as_str()) {
                return Err(Error::DuplicateFeature(f.name.clone()));
            }
            if f.kind != FeatureKind::BinaryContext && f.descriptor.trim().is_empty() {
                return Err(Error::schema(
                    format!("features[{i}].descriptor"),
                    format!("feature `{}` needs a descriptor", f.name),
                ));
            }
        }
        if !self
            .features
            .iter()
            .any(|f| matches!(f.kind, FeatureKind::Numeric | FeatureKind::CyclicTime))
        {
            return Err(Error::schema(
                "features",
                "at least one numeric or cyclic-time feature is required",
            ));
        }
        self.params.validate()
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureSpec> {
        self.features.iter().find(|f| f.name == name)
    }
}

pub fn load_dimension_config(path: impl AsRef<Path>) -> Result<DimensionConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DimensionConfig::from_json_str(&text)
}

/// Daily feature values as read from disk, sorted by date. `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub dates: Vec<NaiveDate>,
    /// Feature names, in configuration order.
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl FeatureTable {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn missing_cells(&self) -> usize {
        self.rows.iter().flatten().filter(|c| c.is_none()).count()
    }

    pub fn from_csv_reader(reader: impl Read, config: &DimensionConfig) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = csv.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        if header.get(0).map(str::trim) != Some("date") {
            return Err(Error::schema("header", "first column must be `date`"));
        }

        // position in the file for each configured feature
        let mut position = vec![None; config.features.len()];
        for (file_col, name) in header.iter().enumerate().skip(1) {
            let name = name.trim();
            let idx = config
                .features
                .iter()
                .position(|f| f.name == name)
                .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
            if position[idx].replace(file_col).is_some() {
                return Err(Error::schema("header", format!("column `{name}` appears twice")));
            }
        }
        if let Some(idx) = position.iter().position(Option::is_none) {
            return Err(Error::MissingColumn(config.features[idx].name.clone()));
        }
        let position: Vec<usize> = position.into_iter().map(Option::unwrap).collect();

        let mut records: Vec<(NaiveDate, Vec<Option<f64>>)> = Vec::new();
        for record in csv.records() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            let date_text = record.get(0).unwrap_or("").trim();
            let date = NaiveDate::parse_from_str(date_text, DATE_FORMAT)
                .map_err(|_| Error::Parse(format!("invalid date `{date_text}` on line {line}")))?;
            let mut row = Vec::with_capacity(config.features.len());
            for (spec, &col) in config.features.iter().zip(&position) {
                let cell = record.get(col).unwrap_or("").trim();
                if cell.is_empty() {
                    row.push(None);
                    continue;
                }
                let value = cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::NonNumeric {
                        column: spec.name.clone(),
                        line,
                        value: cell.to_string(),
                    })?;
                match spec.kind {
                    FeatureKind::CyclicTime if !(0.0..24.0).contains(&value) => {
                        return Err(Error::OutOfCyclicRange {
                            column: spec.name.clone(),
                            date,
                            value,
                        });
                    }
                    FeatureKind::BinaryContext if value != 0.0 && value != 1.0 => {
                        return Err(Error::schema(
                            spec.name.clone(),
                            format!("binary-context value {value} on {date} is not 0 or 1"),
                        ));
                    }
                    _ => {}
                }
                row.push(Some(value));
            }
            records.push((date, row));
        }

        records.sort_by_key(|(d, _)| *d);
        if let Some(w) = records.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateDate(w[0].0));
        }
        let (dates, rows) = records.into_iter().unzip();
        Ok(FeatureTable {
            dates,
            columns: config.features.iter().map(|f| f.name.clone()).collect(),
            rows,
        })
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("date");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (date, row) in self.dates.iter().zip(&self.rows) {
            out.push_str(&date.format(DATE_FORMAT).to_string());
            for cell in row {
                out.push(',');
                if let Some(v) = cell {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

pub fn load_feature_table(path: impl AsRef<Path>, config: &DimensionConfig) -> Result<FeatureTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    FeatureTable::from_csv_reader(std::io::BufReader::new(file), config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Value,
    Sin,
    Cos,
    Context,
}

/// Provenance of one encoded column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    /// Configured feature this column derives from; `None` for calendar context columns.
    pub source: Option<String>,
    pub role: ColumnRole,
}

/// Encoded daily feature matrix for one subject and dimension.
#[derive(Debug, Clone)]
pub struct BehavioralSeries {
    pub subject_id: String,
    pub dimension: String,
    pub dates: Vec<NaiveDate>,
    /// Original units after cyclic expansion, imputation and context augmentation.
    pub raw: Array2<f64>,
    pub standardized: Array2<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub columns: Vec<ColumnMeta>,
    /// Rows in which at least one cell was imputed.
    pub imputed_rows: Vec<usize>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

impl BehavioralSeries {
    /// Encodes a loaded table: cyclic features become sin/cos pairs, missing cells take the
    /// column median, calendar context is appended, then every column is z-scored globally.
    pub fn build(subject_id: impl Into<String>, config: &DimensionConfig, table: &FeatureTable) -> Result<Self> {
        let t_len = table.len();
        let mut columns = Vec::new();
        let mut values: Vec<Vec<Option<f64>>> = Vec::new();

        for (j, spec) in config.features.iter().enumerate() {
            let cells = table.rows.iter().map(|r| r[j]);
            match spec.kind {
                FeatureKind::Numeric | FeatureKind::BinaryContext => {
                    let role = if spec.kind == FeatureKind::Numeric {
                        ColumnRole::Value
                    } else {
                        ColumnRole::Context
                    };
                    columns.push(ColumnMeta {
                        name: spec.name.clone(),
                        source: Some(spec.name.clone()),
                        role,
                    });
                    values.push(cells.collect());
                }
                FeatureKind::CyclicTime => {
                    let mut sin = Vec::with_capacity(t_len);
                    let mut cos = Vec::with_capacity(t_len);
                    for cell in cells {
                        match cell {
                            Some(h) => {
                                let (s, c) = encoding::encode_cyclic(h)?;
                                sin.push(Some(s));
                                cos.push(Some(c));
                            }
                            None => {
                                sin.push(None);
                                cos.push(None);
                            }
                        }
                    }
                    for (suffix, role, col) in [("sin", ColumnRole::Sin, sin), ("cos", ColumnRole::Cos, cos)] {
                        columns.push(ColumnMeta {
                            name: format!("{}_{suffix}", spec.name),
                            source: Some(spec.name.clone()),
                            role,
                        });
                        values.push(col);
                    }
                }
            }
        }

        let mut imputed = vec![false; t_len];
        let mut filled: Vec<Vec<f64>> = Vec::with_capacity(values.len());
        for (meta, col) in columns.iter().zip(values) {
            let mut observed: Vec<f64> = col.iter().flatten().copied().collect();
            if observed.is_empty() && t_len > 0 {
                return Err(Error::schema(
                    meta.source.clone().unwrap_or_default(),
                    "column has no observed values",
                ));
            }
            let fill = if observed.is_empty() {
                0.0
            } else {
                median(&mut observed)
            };
            filled.push(
                col.iter()
                    .enumerate()
                    .map(|(t, c)| {
                        c.unwrap_or_else(|| {
                            imputed[t] = true;
                            fill
                        })
                    })
                    .collect(),
            );
        }

        let (context_names, context) = encoding::add_context_features(&table.dates, config.params.context);
        let n_cols = filled.len() + context_names.len();
        let mut raw = Array2::zeros((t_len, n_cols));
        for (j, col) in filled.iter().enumerate() {
            for (t, v) in col.iter().enumerate() {
                raw[[t, j]] = *v;
            }
        }
        let offset = filled.len();
        for (k, name) in context_names.into_iter().enumerate() {
            for t in 0..t_len {
                raw[[t, offset + k]] = context[[t, k]];
            }
            columns.push(ColumnMeta {
                name,
                source: None,
                role: ColumnRole::Context,
            });
        }

        let std = encoding::standardize(raw.view());
        Ok(BehavioralSeries {
            subject_id: subject_id.into(),
            dimension: config.dimension_name.clone(),
            dates: table.dates.clone(),
            raw,
            standardized: std.z,
            means: std.means,
            stds: std.stds,
            columns,
            imputed_rows: imputed
                .iter()
                .enumerate()
                .filter_map(|(t, &m)| m.then_some(t))
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    /// Mask of columns with nonzero global variance.
    pub fn active_columns(&self) -> Vec<bool> {
        self.stds.iter().map(|&s| s > 0.0).collect()
    }

    /// Calendar gaps of at least [`GAP_REPORT_DAYS`] missing days between consecutive rows.
    pub fn calendar_gaps(&self) -> Vec<CalendarGap> {
        self.dates
            .windows(2)
            .filter_map(|w| {
                let missing = (w[1] - w[0]).num_days() - 1;
                (missing >= GAP_REPORT_DAYS).then_some(CalendarGap {
                    after: w[0],
                    before: w[1],
                    missing_days: missing,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalendarGap {
    pub after: NaiveDate,
    pub before: NaiveDate,
    pub missing_days: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationFlag {
    TooShort { len: usize, required: usize },
    CalendarGap(CalendarGap),
    ZeroVariance { column: String },
}

impl fmt::Display for ValidationFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationFlag::TooShort { len, required } => {
                write!(f, "too short for any change point ({len} days, {required} required)")
            }
            ValidationFlag::CalendarGap(g) => write!(
                f,
                "calendar gap of {} days between {} and {}",
                g.missing_days, g.after, g.before
            ),
            ValidationFlag::ZeroVariance { column } => write!(f, "zero-variance feature `{column}`"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub flags: Vec<ValidationFlag>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn segmentation_eligible(&self) -> bool {
        !self.flags.iter().any(|f| matches!(f, ValidationFlag::TooShort { .. }))
    }
}

/// Checks a series for conditions that degrade the analysis. Never fails.
pub fn validate_series(series: &BehavioralSeries, params: &PipelineParams) -> ValidationReport {
    let mut flags = Vec::new();
    let required = 2 * params.min_size;
    if series.len() < required {
        flags.push(ValidationFlag::TooShort {
            len: series.len(),
            required,
        });
    }
    flags.extend(series.calendar_gaps().into_iter().map(ValidationFlag::CalendarGap));
    for (meta, &s) in series.columns.iter().zip(&series.stds) {
        if s == 0.0 {
            flags.push(ValidationFlag::ZeroVariance {
                column: meta.name.clone(),
            });
        }
    }
    ValidationReport { flags }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_config() -> &'static str {
        r#"{
            "dimension": "activity",
            "features": [
                {"name": "steps", "kind": "numeric", "unit": "count", "descriptor": "Steps taken during the day."},
                {"name": "active_minutes", "kind": "numeric", "unit": "min", "descriptor": "Minutes of moderate activity."}
            ]
        }"#
    }

    fn cyclic_config() -> DimensionConfig {
        DimensionConfig::from_json_str(
            r#"{
            "dimension": "sleep",
            "features": [
                {"name": "duration", "kind": "numeric", "unit": "h", "descriptor": "Hours asleep."},
                {"name": "onset", "kind": "cyclic-time", "unit": "h", "descriptor": "Sleep start time."},
                {"name": "holiday", "kind": "binary-context", "unit": "", "descriptor": ""}
            ],
            "params": {"min_size": 2}
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = DimensionConfig::from_json_str(minimal_config()).unwrap();
        assert_eq!(c.params.beta, 60.0);
        assert_eq!(c.params.tau_s, 0.5);
        assert_eq!(c.params.tau_d, 0.25);
        assert_eq!(c.params.min_size, 90);
        assert_eq!(c.params.min_samples, 5);
        assert_eq!(c.params.w_c, 0.7);
        assert_eq!(c.granularity, Granularity::Day);
    }

    #[test]
    fn weight_sum_violation() {
        let text = minimal_config().replace("\"features\"", "\"params\": {\"w_c\": 0.9, \"w_v\": 0.2}, \"features\"");
        let err = DimensionConfig::from_json_str(&text).unwrap_err();
        assert!(err.to_string().contains("weights must sum to 1"), "{err}");
    }

    #[test]
    fn duplicate_feature_is_named() {
        let text = minimal_config().replace("active_minutes", "steps");
        let err = DimensionConfig::from_json_str(&text).unwrap_err();
        assert!(matches!(&err, Error::DuplicateFeature(n) if n == "steps"), "{err}");
    }

    #[test]
    fn descriptor_required_for_numeric() {
        let text = minimal_config().replace("Steps taken during the day.", "");
        let err = DimensionConfig::from_json_str(&text).unwrap_err();
        assert!(matches!(err, Error::Schema { .. }));
    }

    #[test]
    fn needs_a_value_feature() {
        let text = r#"{"dimension": "x", "features": [{"name": "h", "kind": "binary-context"}]}"#;
        assert!(DimensionConfig::from_json_str(text).is_err());
    }

    #[test]
    fn table_sorted_by_date() {
        let c = DimensionConfig::from_json_str(minimal_config()).unwrap();
        let csv = "date,steps,active_minutes\n2024-01-02,2,20\n2024-01-01,1,10\n2024-01-03,3,30\n";
        let t = FeatureTable::from_csv_reader(csv.as_bytes(), &c).unwrap();
        assert_eq!(
            t.dates.iter().map(|d| d.to_string()).collect::<Vec<_>>(),
            ["2024-01-01", "2024-01-02", "2024-01-03"]
        );
        assert_eq!(t.rows[0], vec![Some(1.0), Some(10.0)]);
    }

    #[test]
    fn table_errors() {
        let c = DimensionConfig::from_json_str(minimal_config()).unwrap();
        let dup = "date,steps,active_minutes\n2024-01-02,2,20\n2024-01-02,1,10\n";
        let err = FeatureTable::from_csv_reader(dup.as_bytes(), &c).unwrap_err();
        assert!(err.to_string().contains("2024-01-02"));

        let unknown = "date,steps,active_minutes,cadence\n2024-01-02,2,20,1\n";
        assert!(matches!(
            FeatureTable::from_csv_reader(unknown.as_bytes(), &c),
            Err(Error::UnknownColumn(_))
        ));

        let missing = "date,steps\n2024-01-02,2\n";
        assert!(matches!(
            FeatureTable::from_csv_reader(missing.as_bytes(), &c),
            Err(Error::MissingColumn(_))
        ));

        let text = "date,steps,active_minutes\n2024-01-02,lots,20\n";
        assert!(matches!(
            FeatureTable::from_csv_reader(text.as_bytes(), &c),
            Err(Error::NonNumeric { .. })
        ));

        let cc = cyclic_config();
        let cyc = "date,duration,onset,holiday\n2024-01-02,7,25.0,0\n";
        let err = FeatureTable::from_csv_reader(cyc.as_bytes(), &cc).unwrap_err();
        assert!(err.to_string().contains("out of cyclic range"), "{err}");
    }

    #[test]
    fn series_expands_cyclic_and_imputes() {
        let c = cyclic_config();
        let csv = "date,onset,duration,holiday\n\
                   2024-01-05,23,7,0\n2024-01-06,1,,1\n2024-01-07,0,8,0\n2024-01-08,22,9,0\n";
        let t = FeatureTable::from_csv_reader(csv.as_bytes(), &c).unwrap();
        assert_eq!(t.missing_cells(), 1);
        let s = BehavioralSeries::build("s1", &c, &t).unwrap();
        let names: Vec<_> = s.columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["duration", "onset_sin", "onset_cos", "holiday", "is_weekend"]);
        assert_eq!(s.imputed_rows, vec![1]);
        assert_eq!(s.raw[[1, 0]], 8.0, "median of 7, 8, 9");
        assert_eq!(s.raw.dim(), s.standardized.dim());
        for j in 0..s.n_columns() {
            let col = s.standardized.column(j);
            let mean = col.sum() / col.len() as f64;
            assert!(mean.abs() < 1e-9);
        }
    }

    #[test]
    fn validation_flags() {
        let c = DimensionConfig::from_json_str(minimal_config()).unwrap();
        let mut csv = String::from("date,steps,active_minutes\n");
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        for i in 0..150 {
            csv.push_str(&format!("{},{},5\n", start + chrono::Days::new(i), i % 7));
        }
        let t = FeatureTable::from_csv_reader(csv.as_bytes(), &c).unwrap();
        let s = BehavioralSeries::build("s", &c, &t).unwrap();
        let report = validate_series(&s, &c.params);
        assert!(!report.segmentation_eligible());
        let text: Vec<String> = report.flags.iter().map(|f| f.to_string()).collect();
        assert!(text.iter().any(|t| t.starts_with("too short for any change point")));
        assert!(text.iter().any(|t| t.contains("zero-variance feature")));
    }

    #[test]
    fn long_clean_series_has_empty_report() {
        let c = DimensionConfig::from_json_str(minimal_config()).unwrap();
        let mut csv = String::from("date,steps,active_minutes\n");
        let start = NaiveDate::from_ymd_opt(2024, 1, 1).unwrap();
        for i in 0..400u64 {
            csv.push_str(&format!("{},{},{}\n", start + chrono::Days::new(i), i % 7, i % 5));
        }
        let t = FeatureTable::from_csv_reader(csv.as_bytes(), &c).unwrap();
        let s = BehavioralSeries::build("s", &c, &t).unwrap();
        assert!(validate_series(&s, &c.params).is_empty());
    }

    #[test]
    fn gaps_are_flagged() {
        let c = DimensionConfig::from_json_str(minimal_config()).unwrap();
        let csv = "date,steps,active_minutes\n2024-01-01,1,2\n2024-01-02,2,3\n2024-01-12,3,1\n";
        let t = FeatureTable::from_csv_reader(csv.as_bytes(), &c).unwrap();
        let s = BehavioralSeries::build("s", &c, &t).unwrap();
        let gaps = s.calendar_gaps();
        assert_eq!(gaps.len(), 1);
        assert_eq!(gaps[0].missing_days, 9);
    }
}
