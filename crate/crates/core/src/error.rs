// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use chrono::NaiveDate;
use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema violation in `{field}`: {reason}")]
    Schema { field: String, reason: String },

    #[error("{0} weights must sum to 1")]
    WeightSum(&'static str),

    #[error("duplicate feature name `{0}`")]
    DuplicateFeature(String),

    #[error("duplicate date {0}")]
    DuplicateDate(NaiveDate),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("value {value} in column `{column}` on {date} is out of cyclic range [0, 24)")]
    OutOfCyclicRange {
        column: String,
        date: NaiveDate,
        value: f64,
    },

    #[error("hour value {0} is out of cyclic range [0, 24)")]
    HourOutOfRange(f64),

    #[error("cyclic phase undefined for near-zero vector ({0}, {1})")]
    UndefinedPhase(f64, f64),

    #[error("non-numeric cell `{value}` in column `{column}` on line {line}")]
    NonNumeric { column: String, line: u64, value: String },

    #[error("index range [{start}, {end}) is invalid for a series of length {len}")]
    IndexBounds { start: usize, end: usize, len: usize },

    #[error("series of length {len} is shorter than min_size {min_size}")]
    SeriesTooShort { len: usize, min_size: usize },

    #[error("brute-force segmentation is capped at {cap} points, got {len}")]
    SizeCap { len: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero-length {0} period")]
    EmptyPeriod(&'static str),

    #[error("missing feature descriptor for `{0}`")]
    MissingDescriptor(String),

    #[error("missing routine description for {0}")]
    MissingDescription(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("infeasible occupancy: {0}")]
    InfeasibleOccupancy(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("empty cohort: {0}")]
    EmptyCohort(String),

    #[error("LLM request failed: {0}")]
    Llm(#[from] LlmError),
}

/// Failures of the narrative-generation endpoint.
#[derive(Debug, Error)]
pub enum LlmError {
    #[error("network failure: {0}")]
    Network(String),
    #[error("request timed out")]
    Timeout,
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("response is missing section {0}")]
    MissingSection(char),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn schema(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by invalid input data rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Llm(_))
    }
}
