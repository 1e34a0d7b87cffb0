// SPDX-License-Identifier: MIT OR Apache-2.0

//! Penalized change point detection with a within-segment L2 cost.
//!
//! The objective is `sum of segment costs + beta * m` over all segmentations of `[0, T)` whose
//! segments are at least `min_size` rows long, where a segment's cost is the sum of squared
//! Euclidean residuals around its mean. [`pelt`] finds the exact minimizer;
//! [`brute_force_segmentation`] solves the same problem without pruning and serves as a check.
//!
//! Among segmentations whose objective values agree to a relative `1e-9`, the one with fewer
//! change points wins, then the lexicographically smallest list of change points.

use std::cmp::Ordering;
use std::ops::Range;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest series accepted by [`brute_force_segmentation`].
pub const BRUTE_FORCE_CAP: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationResult {
    /// Strictly increasing start indices of every segment but the first.
    pub change_points: Vec<usize>,
    pub segments: Vec<Range<usize>>,
    /// Objective value, including `beta * m`.
    pub total_cost: f64,
}

impl SegmentationResult {
    fn from_change_points(change_points: Vec<usize>, len: usize, total_cost: f64) -> Self {
        let mut bounds = Vec::with_capacity(change_points.len() + 2);
        bounds.push(0);
        bounds.extend_from_slice(&change_points);
        bounds.push(len);
        let segments = bounds.windows(2).map(|w| w[0]..w[1]).collect();
        SegmentationResult {
            change_points,
            segments,
            total_cost,
        }
    }

    pub fn len(&self) -> usize {
        self.change_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.change_points.is_empty()
    }
}

/// Compensated running sum.
#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Prefix sums answering segment-cost queries in `O(n)` per query (`O(1)` in the series length).
pub struct L2Cost {
    len: usize,
    dim: usize,
    /// `(len + 1) * dim` prefix sums of each column.
    sums: Vec<f64>,
    /// `len + 1` prefix sums of squared row norms.
    squares: Vec<f64>,
}

impl L2Cost {
    pub fn new(x: ArrayView2<f64>) -> Self {
        let (len, dim) = x.dim();
        let mut sums = vec![0.0; (len + 1) * dim];
        let mut squares = vec![0.0; len + 1];
        let mut col_acc = vec![Neumaier::default(); dim];
        let mut sq_acc = Neumaier::default();
        for (t, row) in x.rows().into_iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                col_acc[j].add(v);
                sq_acc.add(v * v);
                sums[(t + 1) * dim + j] = col_acc[j].value();
            }
            squares[t + 1] = sq_acc.value();
        }
        L2Cost {
            len,
            dim,
            sums,
            squares,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Sum of squared residuals of rows `a..b` around their mean, without the length guard.
    pub fn residual(&self, a: usize, b: usize) -> f64 {
        let n = (b - a) as f64;
        let mut centered = self.squares[b] - self.squares[a];
        for j in 0..self.dim {
            let s = self.sums[b * self.dim + j] - self.sums[a * self.dim + j];
            centered -= s * s / n;
        }
        centered.max(0.0)
    }

    /// Segment cost with the minimum-length guard: `+inf` when `b - a < min_size`.
    pub fn cost(&self, a: usize, b: usize, min_size: usize) -> f64 {
        if b - a < min_size {
            f64::INFINITY
        } else {
            self.residual(a, b)
        }
    }
}

/// Cost of segment `[a, b)`: squared L2 residuals around the segment mean, or `+inf` if the
/// segment is shorter than `min_size`.
pub fn segment_cost(x: ArrayView2<f64>, a: usize, b: usize, min_size: usize) -> Result<f64> {
    let len = x.nrows();
    if a >= b || b > len {
        return Err(Error::IndexBounds { start: a, end: b, len });
    }
    Ok(L2Cost::new(x.slice(ndarray::s![a..b, ..])).cost(0, b - a, min_size))
}

/// Best known segmentation of a prefix `[0, t)`.
#[derive(Clone)]
struct Prefix {
    cost: f64,
    change_points: Vec<usize>,
}

fn tie_tolerance(a: f64, b: f64) -> f64 {
    1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Total order used to pick among candidate segmentations of the same prefix.
fn compare(cost_a: f64, cps_a: &[usize], cost_b: f64, cps_b: &[usize]) -> Ordering {
    if (cost_a - cost_b).abs() > tie_tolerance(cost_a, cost_b) {
        return cost_a.total_cmp(&cost_b);
    }
    cps_a.len().cmp(&cps_b.len()).then_with(|| cps_a.cmp(cps_b))
}

/// Picks the best extension `prefix(s) + [s, t)` among the given last change points.
fn best_extension(
    prefixes: &[Option<Prefix>],
    starts: impl Iterator<Item = usize>,
    segment_cost: impl Fn(usize) -> f64,
    beta: f64,
) -> Option<Prefix> {
    let mut best: Option<Prefix> = None;
    for s in starts {
        let Some(prev) = &prefixes[s] else { continue };
        let cost = prev.cost + segment_cost(s) + beta;
        let mut cps = prev.change_points.clone();
        if s > 0 {
            cps.push(s);
        }
        let better = match &best {
            None => true,
            Some(b) => compare(cost, &cps, b.cost, &b.change_points) == Ordering::Less,
        };
        if better {
            best = Some(Prefix {
                cost,
                change_points: cps,
            });
        }
    }
    best
}

fn check_inputs(len: usize, beta: f64, min_size: usize) -> Result<()> {
    if min_size == 0 {
        return Err(Error::schema("min_size", "must be positive"));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::schema("beta", "must be a nonnegative real"));
    }
    if len < min_size {
        return Err(Error::SeriesTooShort { len, min_size });
    }
    Ok(())
}

/// Exact penalized segmentation by the Pruned Exact Linear Time recursion.
///
/// Pruning uses `K = 0`: splitting a segment never increases the L2 residual cost, so once
/// `F(s) + C(s, t) > F(t)` the candidate `s` loses to `t` for every end `t' >= t + min_size`.
/// Ends in `(t, t + min_size)` cannot use `t` yet, so `s` stays eligible for them and is dropped
/// only afterwards.
pub fn pelt(x: ArrayView2<f64>, beta: f64, min_size: usize) -> Result<SegmentationResult> {
    let len = x.nrows();
    check_inputs(len, beta, min_size)?;
    let cost = L2Cost::new(x);

    let mut prefixes: Vec<Option<Prefix>> = vec![None; len + 1];
    prefixes[0] = Some(Prefix {
        cost: -beta,
        change_points: Vec::new(),
    });
    // (start, time at which it was pruned)
    let mut candidates: Vec<(usize, Option<usize>)> = Vec::new();

    for t in min_size..=len {
        let newest = t - min_size;
        if prefixes[newest].is_some() {
            candidates.push((newest, None));
        }
        let best = best_extension(
            &prefixes,
            candidates.iter().map(|&(s, _)| s),
            |s| cost.cost(s, t, min_size),
            beta,
        );
        if let Some(best_t) = &best {
            for (s, pruned_at) in candidates.iter_mut() {
                if pruned_at.is_none() {
                    let f_s = prefixes[*s].as_ref().map_or(f64::INFINITY, |p| p.cost);
                    let lhs = f_s + cost.cost(*s, t, min_size);
                    if lhs > best_t.cost + tie_tolerance(lhs, best_t.cost) {
                        *pruned_at = Some(t);
                    }
                }
            }
        }
        prefixes[t] = best;
        candidates.retain(|&(_, pruned_at)| pruned_at.is_none_or(|p| p + min_size > t + 1));
    }

    let end = prefixes[len].take().expect("len >= min_size makes [0, len) feasible");
    Ok(SegmentationResult::from_change_points(end.change_points, len, end.cost))
}

/// Unpruned `O(T^2)` dynamic program over the same objective as [`pelt`].
///
/// Segment costs come from running Welford updates rather than prefix sums, so this shares no
/// numerical path with [`pelt`].
pub fn brute_force_segmentation(x: ArrayView2<f64>, beta: f64, min_size: usize) -> Result<SegmentationResult> {
    let (len, dim) = x.dim();
    if len > BRUTE_FORCE_CAP {
        return Err(Error::SizeCap {
            len,
            cap: BRUTE_FORCE_CAP,
        });
    }
    check_inputs(len, beta, min_size)?;

    let mut prefixes: Vec<Option<Prefix>> = vec![None; len + 1];
    prefixes[0] = Some(Prefix {
        cost: -beta,
        change_points: Vec::new(),
    });

    let mut mean = vec![0.0; dim];
    let mut m2 = vec![0.0; dim];
    let mut costs = vec![f64::INFINITY; len + 1];
    for t in min_size..=len {
        // grow the segment backwards from t-1 down to 0, recording costs of [s, t)
        mean.iter_mut().for_each(|m| *m = 0.0);
        m2.iter_mut().for_each(|m| *m = 0.0);
        for (count, s) in (0..t).rev().enumerate() {
            let k = (count + 1) as f64;
            for j in 0..dim {
                let v = x[[s, j]];
                let delta = v - mean[j];
                mean[j] += delta / k;
                m2[j] += delta * (v - mean[j]);
            }
            costs[s] = if t - s >= min_size {
                m2.iter().sum()
            } else {
                f64::INFINITY
            };
        }
        prefixes[t] = best_extension(&prefixes, 0..=t - min_size, |s| costs[s], beta);
    }

    let end = prefixes[len].take().expect("len >= min_size makes [0, len) feasible");
    Ok(SegmentationResult::from_change_points(end.change_points, len, end.cost))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaSweepPoint {
    pub beta: f64,
    pub change_points: usize,
}

/// Number of change points found by [`pelt`] for each penalty value.
pub fn sweep_beta(x: ArrayView2<f64>, betas: &[f64], min_size: usize) -> Result<Vec<BetaSweepPoint>> {
    betas
        .par_iter()
        .map(|&beta| {
            pelt(x, beta, min_size).map(|r| BetaSweepPoint {
                beta,
                change_points: r.len(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{Array2, array};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn column(values: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((values.len(), 1), values.to_vec()).unwrap()
    }

    fn noise(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> Array2<f64> {
        Array2::from_shape_fn((len, dim), |_| rng.sample(StandardNormal))
    }

    /// Direct two-pass residual sum, used to check the prefix-sum path.
    fn direct_cost(x: &Array2<f64>, a: usize, b: usize) -> f64 {
        let seg = x.slice(ndarray::s![a..b, ..]);
        let mean = seg.mean_axis(ndarray::Axis(0)).unwrap();
        seg.rows()
            .into_iter()
            .map(|r| r.iter().zip(&mean).map(|(v, m)| (v - m).powi(2)).sum::<f64>())
            .sum()
    }

    #[test]
    fn cost_examples() {
        let x = column(&[0.0, 0.0, 4.0, 4.0]);
        assert_abs_diff_eq!(segment_cost(x.view(), 0, 4, 4).unwrap(), 16.0, epsilon = 1e-12);
        assert_eq!(segment_cost(x.view(), 0, 2, 1).unwrap(), 0.0);
        assert_eq!(segment_cost(x.view(), 0, 3, 4).unwrap(), f64::INFINITY);
        assert!(segment_cost(x.view(), 2, 2, 1).is_err());
        assert!(segment_cost(x.view(), 0, 5, 1).is_err());
        let constant = array![[1.5, -2.0], [1.5, -2.0], [1.5, -2.0]];
        assert_eq!(segment_cost(constant.view(), 0, 3, 1).unwrap(), 0.0);
    }

    #[test]
    fn prefix_sums_match_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = noise(&mut rng, 120, 4) * 3.0 + 1.0;
        let cost = L2Cost::new(x.view());
        for (a, b) in [(0, 120), (5, 17), (40, 41), (90, 120), (0, 2)] {
            let direct = direct_cost(&x, a, b);
            let fast = cost.residual(a, b);
            assert!(
                (fast - direct).abs() <= 1e-9 * direct.max(1.0),
                "{a}..{b}: {fast} vs {direct}"
            );
        }
    }

    #[test]
    fn step_series_has_one_change_point() {
        let mut values = vec![0.0; 100];
        values.extend(vec![5.0; 100]);
        let x = crate::encoding::standardize(column(&values).view()).z;
        let r = pelt(x.view(), 60.0, 30).unwrap();
        assert_eq!(r.change_points, vec![100]);
        let oracle = brute_force_segmentation(x.view(), 60.0, 30).unwrap();
        assert_eq!(oracle.change_points, vec![100]);
        assert_eq!(r.segments, vec![0..100, 100..200]);
    }

    #[test]
    fn large_penalty_means_no_change() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = noise(&mut rng, 150, 3);
        let r = pelt(x.view(), 10.0 * 150.0, 5).unwrap();
        assert!(r.is_empty());
        assert_eq!(r.segments, vec![0..150]);
    }

    #[test]
    fn zero_penalty_over_segments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = noise(&mut rng, 40, 2);
        let r = pelt(x.view(), 0.0, 1).unwrap();
        assert_eq!(r.change_points, (1..40).collect::<Vec<_>>());
        assert_abs_diff_eq!(r.total_cost, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn three_regime_piecewise_constant() {
        let mut values = vec![1.0; 40];
        values.extend(vec![-2.0; 50]);
        values.extend(vec![3.0; 45]);
        let x = column(&values);
        let oracle = brute_force_segmentation(x.view(), 1.0, 10).unwrap();
        assert_eq!(oracle.change_points, vec![40, 90]);
        assert_abs_diff_eq!(oracle.total_cost, 2.0, epsilon = 1e-9);
        assert_eq!(pelt(x.view(), 1.0, 10).unwrap().change_points, vec![40, 90]);
    }

    #[test]
    fn min_size_edge_cases() {
        let x = column(&[1.0, 5.0, 2.0, 9.0]);
        assert!(brute_force_segmentation(x.view(), 0.0, 4).unwrap().is_empty());
        assert!(pelt(x.view(), 0.0, 4).unwrap().is_empty());
        assert!(matches!(pelt(x.view(), 1.0, 5), Err(Error::SeriesTooShort { .. })));
        let big = Array2::<f64>::zeros((BRUTE_FORCE_CAP + 1, 1));
        assert!(matches!(
            brute_force_segmentation(big.view(), 1.0, 1),
            Err(Error::SizeCap { .. })
        ));
    }

    #[test]
    fn ties_prefer_fewer_change_points() {
        // Constant series: every segmentation has zero residual cost.
        let x = column(&[2.0; 30]);
        assert!(pelt(x.view(), 0.0, 3).unwrap().is_empty());
        assert!(brute_force_segmentation(x.view(), 0.0, 3).unwrap().is_empty());
    }

    #[test]
    fn sweep_half_length_min_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = noise(&mut rng, 60, 2);
        let sweep = sweep_beta(x.view(), &[0.0, 1.0, 1e9], 30).unwrap();
        assert!(sweep[0].change_points <= 1);
        assert_eq!(sweep[2].change_points, 0);
    }

    #[test]
    fn pelt_matches_oracle_on_random_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..40 {
            let len = rng.random_range(10..120);
            let dim = rng.random_range(1..5);
            let min_size = rng.random_range(1..8);
            let beta = rng.random_range(0.0..15.0);
            let mut x = noise(&mut rng, len, dim);
            let shift = rng.random_range(0..len);
            x.slice_mut(ndarray::s![shift.., ..]).mapv_inplace(|v| v + 2.0);
            let fast = pelt(x.view(), beta, min_size).unwrap();
            let slow = brute_force_segmentation(x.view(), beta, min_size).unwrap();
            assert!((fast.total_cost - slow.total_cost).abs() <= 1e-6);
            assert!(fast.segments.iter().all(|s| s.len() >= min_size));
        }
    }
}
