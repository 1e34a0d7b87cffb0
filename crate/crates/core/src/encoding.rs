// SPDX-License-Identifier: MIT OR Apache-2.0

//! Feature encoding: cyclic clock times, calendar context and global z-scores.

use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate, Weekday};
use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const HOURS_PER_DAY: f64 = 24.0;

/// Norm at or below which an encoded clock time has no defined phase.
const MIN_PHASE_NORM: f64 = 1e-9;

/// Maps a clock time in hours to a point on the unit circle.
///
/// ```
/// let (s, c) = routinecd::encoding::encode_cyclic(6.0).unwrap();
/// assert!((s - 1.0).abs() < 1e-12 && c.abs() < 1e-12);
/// ```
pub fn encode_cyclic(hours: f64) -> Result<(f64, f64)> {
    if !(0.0..HOURS_PER_DAY).contains(&hours) {
        return Err(Error::HourOutOfRange(hours));
    }
    let angle = 2.0 * PI * hours / HOURS_PER_DAY;
    Ok((angle.sin(), angle.cos()))
}

/// Inverse of [`encode_cyclic`]. Accepts points strictly inside the circle,
/// which is where averaged encodings end up.
pub fn decode_cyclic(sin: f64, cos: f64) -> Result<f64> {
    if sin.hypot(cos) <= MIN_PHASE_NORM {
        return Err(Error::UndefinedPhase(sin, cos));
    }
    let mut hours = sin.atan2(cos) * HOURS_PER_DAY / (2.0 * PI);
    if hours < 0.0 {
        hours += HOURS_PER_DAY;
    }
    // atan2 can return exactly pi after the shift above rounds up.
    if hours >= HOURS_PER_DAY {
        hours -= HOURS_PER_DAY;
    }
    Ok(hours)
}

/// Which calendar context columns to append to a daily series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    None,
    WeekdayOnehot,
    #[default]
    IsWeekend,
    Both,
}

pub const WEEKDAY_COLUMNS: [&str; 7] = [
    "weekday_mon",
    "weekday_tue",
    "weekday_wed",
    "weekday_thu",
    "weekday_fri",
    "weekday_sat",
    "weekday_sun",
];

pub const WEEKEND_COLUMN: &str = "is_weekend";

pub fn is_weekend(date: NaiveDate) -> bool {
    matches!(date.weekday(), Weekday::Sat | Weekday::Sun)
}

/// Calendar context block for `dates`: column names plus a `dates.len() x k` 0/1 matrix.
pub fn add_context_features(dates: &[NaiveDate], mode: ContextMode) -> (Vec<String>, Array2<f64>) {
    let mut names: Vec<String> = Vec::new();
    if matches!(mode, ContextMode::WeekdayOnehot | ContextMode::Both) {
        names.extend(WEEKDAY_COLUMNS.iter().map(|s| s.to_string()));
    }
    if matches!(mode, ContextMode::IsWeekend | ContextMode::Both) {
        names.push(WEEKEND_COLUMN.to_string());
    }

    let mut block = Array2::zeros((dates.len(), names.len()));
    for (t, date) in dates.iter().enumerate() {
        let mut col = 0;
        if matches!(mode, ContextMode::WeekdayOnehot | ContextMode::Both) {
            block[[t, date.weekday().num_days_from_monday() as usize]] = 1.0;
            col = 7;
        }
        if matches!(mode, ContextMode::IsWeekend | ContextMode::Both) && is_weekend(*date) {
            block[[t, col]] = 1.0;
        }
    }
    (names, block)
}

/// Output of [`standardize`]: z-scores plus the statistics needed to undo them.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub z: Array2<f64>,
    pub means: Vec<f64>,
    /// Population standard deviations; exactly 0 for constant columns.
    pub stds: Vec<f64>,
}

/// Column-wise z-scores over the whole series, using the population standard deviation.
///
/// A column whose values are all equal maps to zeros and records `std = 0`.
pub fn standardize(matrix: ArrayView2<f64>) -> Standardized {
    let (rows, cols) = matrix.dim();
    let mut z = Array2::zeros((rows, cols));
    let mut means = Vec::with_capacity(cols);
    let mut stds = Vec::with_capacity(cols);

    for (j, column) in matrix.axis_iter(Axis(1)).enumerate() {
        let (mean, std) = column_stats(column);
        means.push(mean);
        stds.push(std);
        if std > 0.0 {
            for (t, x) in column.iter().enumerate() {
                z[[t, j]] = (x - mean) / std;
            }
        }
    }
    Standardized { z, means, stds }
}

fn column_stats(column: ArrayView1<f64>) -> (f64, f64) {
    let n = column.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let first = column[0];
    let mean = column.sum() / n as f64;
    if column.iter().all(|&x| x == first) {
        return (first, 0.0);
    }
    let var = column.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Maps a standardized vector back to original units. Columns with `std = 0` return their mean.
pub fn destandardize(z: &[f64], means: &[f64], stds: &[f64]) -> Result<Vec<f64>> {
    if z.len() != means.len() || z.len() != stds.len() {
        return Err(Error::DimensionMismatch {
            expected: means.len(),
            actual: z.len(),
        });
    }
    Ok(z.iter()
        .zip(means.iter().zip(stds))
        .map(|(&zj, (&mu, &sigma))| if sigma == 0.0 { mu } else { zj * sigma + mu })
        .collect())
}
