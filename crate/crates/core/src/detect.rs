//! Disruption detection on the residual `P(t) − O(t)`.
//!
//! The relative loss is partitioned into constant-mean segments by exact
//! penalized least squares. Windows grow out from each peak of the relative
//! loss while it stays positive, stopping early where a small tail turns
//! back up; the segment boundary nearest each window's peak separates
//! its decline and recovery phases. Windows with fewer than `min_duration`
//! months of material loss, or peaking below `min_peak_ratio`, are
//! discarded.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::BaselineForecast;
use crate::series::{MonthStamp, PerformanceSeries};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectError {
    #[error("observed ({observed_len} months from {observed_start}) and forecast ({forecast_len} months from {forecast_start}) are not aligned")]
    AlignmentMismatch {
        observed_start: MonthStamp,
        observed_len: usize,
        forecast_start: MonthStamp,
        forecast_len: usize,
    },
    #[error("forecast is not positive at month index {0}")]
    NonPositiveForecast(usize),
}

/// `loss = P − O` and `relative_loss = loss / P`, month by month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub start: MonthStamp,
    pub loss: Vec<f64>,
    pub relative_loss: Vec<f64>,
}

impl ResidualSeries {
    pub fn len(&self) -> usize {
        self.loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loss.is_empty()
    }

    /// The months from `from` (inclusive) to the end.
    pub fn tail(&self, from: usize) -> ResidualSeries {
        ResidualSeries {
            start: self.start.offset(from as i64),
            loss: self.loss[from..].to_vec(),
            relative_loss: self.relative_loss[from..].to_vec(),
        }
    }
}

pub fn residuals(
    observed: &PerformanceSeries,
    forecast: &BaselineForecast,
) -> Result<ResidualSeries, DetectError> {
    if observed.start() != forecast.start() || observed.len() != forecast.values().len() {
        return Err(DetectError::AlignmentMismatch {
            observed_start: observed.start(),
            observed_len: observed.len(),
            forecast_start: forecast.start(),
            forecast_len: forecast.values().len(),
        });
    }
    let mut loss = Vec::with_capacity(observed.len());
    let mut relative_loss = Vec::with_capacity(observed.len());
    for (i, (&o, &p)) in observed.values().iter().zip(forecast.values()).enumerate() {
        if !(p > 0.0) {
            return Err(DetectError::NonPositiveForecast(i));
        }
        let l = p - o;
        loss.push(l);
        relative_loss.push(l / p);
    }
    Ok(ResidualSeries {
        start: observed.start(),
        loss,
        relative_loss,
    })
}

/// A constant-mean block `first..=last`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub first: usize,
    pub last: usize,
    pub mean_loss: f64,
    pub sse: f64,
}

/// Costs closer than this (relative) count as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

pub(crate) fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Exact minimizer of `Σ SSE(segment) + penalty · #segments`.
///
/// Ties go to fewer segments, then to the earliest possible last boundary
/// (recursively, from the back).
pub fn segment(values: &[f64], penalty: f64) -> Vec<Segment> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    // sse[i][j - i]: SSE of values[i..=j] about its mean (Welford).
    let mut sse = Vec::with_capacity(n);
    let mut means = Vec::with_capacity(n);
    for i in 0..n {
        let mut row_sse = Vec::with_capacity(n - i);
        let mut row_mean = Vec::with_capacity(n - i);
        let (mut mean, mut m2) = (0.0, 0.0);
        for (k, &x) in values[i..].iter().enumerate() {
            let d = x - mean;
            mean += d / (k + 1) as f64;
            m2 += d * (x - mean);
            row_sse.push(m2.max(0.0));
            row_mean.push(mean);
        }
        sse.push(row_sse);
        means.push(row_mean);
    }

    // best[j]: optimum over values[..j] as (cost, segments, start of last segment)
    let mut best: Vec<(f64, usize, usize)> = vec![(0.0, 0, 0); n + 1];
    for j in 1..=n {
        let mut cur = (f64::INFINITY, usize::MAX, 0);
        for i in 0..j {
            let cost = best[i].0 + sse[i][j - 1 - i] + penalty;
            let count = best[i].1 + 1;
            let better = if ties(cost, cur.0) {
                count < cur.1
            } else {
                cost < cur.0
            };
            if better {
                cur = (cost, count, i);
            }
        }
        best[j] = cur;
    }

    let mut out = Vec::with_capacity(best[n].1);
    let mut j = n;
    while j > 0 {
        let i = best[j].2;
        out.push(Segment {
            first: i,
            last: j - 1,
            mean_loss: means[i][j - 1 - i],
            sse: sse[i][j - 1 - i],
        });
        j = i;
    }
    out.reverse();
    out
}

/// Total penalized cost of a segmentation.
pub fn segmentation_cost(segments: &[Segment], penalty: f64) -> f64 {
    segments.iter().map(|s| s.sse + penalty).sum()
}

/// Segmentation penalty: fixed, or scaled from the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    /// `2 · median(|Δ|)² · n`, `Δ` the month-over-month changes.
    Auto,
    Fixed(f64),
}

/// Admission thresholds and segmentation penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectOptions {
    pub min_duration: usize,
    pub min_peak_ratio: f64,
    pub penalty: Penalty,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            min_duration: 3,
            min_peak_ratio: 0.05,
            penalty: Penalty::Auto,
        }
    }
}

impl DetectOptions {
    pub fn penalty_for(&self, values: &[f64]) -> f64 {
        match self.penalty {
            Penalty::Fixed(p) => p,
            Penalty::Auto => auto_penalty(values),
        }
    }
}

pub fn auto_penalty(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mut diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    diffs.sort_by(f64::total_cmp);
    let m = diffs.len();
    let median = if m % 2 == 1 {
        diffs[m / 2]
    } else {
        0.5 * (diffs[m / 2 - 1] + diffs[m / 2])
    };
    2.0 * median * median * values.len() as f64
}

/// One admitted disruption, as month indices into the analysed series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisruptionWindow {
    /// First month with positive relative loss.
    pub start_index: usize,
    /// First month back at or above target, or the series length when the
    /// recovery was not observed.
    pub end_index: usize,
    /// Month of maximum relative loss (earliest on ties).
    pub peak_index: usize,
    /// First month of the recovery phase.
    pub split_index: usize,
    pub recovery_observed: bool,
    pub peak_relative_loss: f64,
}

impl DisruptionWindow {
    /// Months of positive loss.
    pub fn duration(&self) -> usize {
        self.end_index - self.start_index
    }

    /// Last on-target month before the loss starts, where the curve leaves
    /// zero.
    pub fn onset_index(&self) -> usize {
        self.start_index.saturating_sub(1)
    }

    /// Shifts every index by `by` months.
    pub fn offset(mut self, by: usize) -> Self {
        self.start_index += by;
        self.end_index += by;
        self.peak_index += by;
        self.split_index += by;
        self
    }

    pub fn record(&self, series_start: MonthStamp) -> WindowRecord {
        WindowRecord {
            start_month: series_start.offset(self.start_index as i64),
            end_month: series_start.offset(self.end_index as i64),
            peak_month: series_start.offset(self.peak_index as i64),
            recovery_observed: self.recovery_observed,
            peak_relative_loss: self.peak_relative_loss,
            duration_months: self.duration(),
        }
    }
}

/// Export form of a [`DisruptionWindow`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    pub start_month: MonthStamp,
    pub end_month: MonthStamp,
    pub peak_month: MonthStamp,
    pub recovery_observed: bool,
    pub peak_relative_loss: f64,
    pub duration_months: usize,
}

/// Every excursion of the relative loss above zero, before admission
/// filtering.
///
/// Each window grows outwards from its peak month while the relative loss
/// stays positive. Once the loss has fallen below `tail_floor` the walk also
/// stops at the first month where it turns back up: a decaying tail does not
/// rise again, but noise around zero does. Months of a positive run left
/// outside the window are scanned again as runs of their own.
pub fn candidate_windows(
    residuals: &ResidualSeries,
    segments: &[Segment],
    tail_floor: f64,
) -> Vec<DisruptionWindow> {
    let rel = &residuals.relative_loss;
    let n = rel.len();
    let mut runs = Vec::new();
    let mut t = 0;
    while t < n {
        if rel[t] > 0.0 {
            let start = t;
            while t < n && rel[t] > 0.0 {
                t += 1;
            }
            runs.push((start, t));
        } else {
            t += 1;
        }
    }

    let mut out = Vec::new();
    while let Some((a, b)) = runs.pop() {
        let mut peak = a;
        for k in a..b {
            if rel[k] > rel[peak] {
                peak = k;
            }
        }
        let continues = |from: usize, to: usize| rel[from] >= tail_floor || rel[to] < rel[from];
        let mut start = peak;
        while start > a && continues(start, start - 1) {
            start -= 1;
        }
        let mut end = peak + 1;
        while end < b && continues(end - 1, end) {
            end += 1;
        }
        if a < start {
            runs.push((a, start));
        }
        if end < b {
            runs.push((end, b));
        }
        let split = segments
            .iter()
            .map(|s| s.first)
            .filter(|&k| k > start && k < end)
            .min_by_key(|&k| (k.abs_diff(peak), k))
            .unwrap_or(peak);
        out.push(DisruptionWindow {
            start_index: start,
            end_index: end,
            peak_index: peak,
            split_index: split,
            recovery_observed: end < n,
            peak_relative_loss: rel[peak],
        });
    }
    out.sort_by_key(|w| w.start_index);
    out
}

/// Months whose relative loss is below this fraction of the window's peak
/// do not count towards its duration.
pub const FOOTPRINT_FRACTION: f64 = 0.05;

/// Months of `window` carrying at least [`FOOTPRINT_FRACTION`] of its peak
/// relative loss.
pub fn footprint_months(relative_loss: &[f64], window: &DisruptionWindow) -> usize {
    let floor = FOOTPRINT_FRACTION * window.peak_relative_loss;
    relative_loss[window.start_index..window.end_index]
        .iter()
        .filter(|&&r| r >= floor)
        .count()
}

/// Candidate windows that pass both admission criteria.
pub fn extract_windows(
    residuals: &ResidualSeries,
    segments: &[Segment],
    options: &DetectOptions,
) -> Vec<DisruptionWindow> {
    candidate_windows(residuals, segments, options.min_peak_ratio)
        .into_iter()
        .filter(|w| {
            w.peak_relative_loss >= options.min_peak_ratio
                && footprint_months(&residuals.relative_loss, w) >= options.min_duration
        })
        .collect()
}

/// Segments `residuals` and extracts admitted windows.
pub fn detect(residuals: &ResidualSeries, options: &DetectOptions) -> (Vec<Segment>, Vec<DisruptionWindow>) {
    let segments = segment(&residuals.relative_loss, options.penalty_for(&residuals.relative_loss));
    let windows = extract_windows(residuals, &segments, options);
    (segments, windows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn start() -> MonthStamp {
        MonthStamp::new(2020, 1).unwrap()
    }

    fn from_relative(rel: &[f64]) -> ResidualSeries {
        ResidualSeries {
            start: start(),
            loss: rel.to_vec(),
            relative_loss: rel.to_vec(),
        }
    }

    /// Every segmentation of `values`, encoded by its boundary bitmask.
    fn brute_force(values: &[f64], penalty: f64) -> Vec<(usize, usize)> {
        let n = values.len();
        let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
        for mask in 0u32..(1 << (n - 1)) {
            let mut segs = Vec::new();
            let mut first = 0;
            for b in 1..n {
                if mask & (1 << (b - 1)) != 0 {
                    segs.push((first, b - 1));
                    first = b;
                }
            }
            segs.push((first, n - 1));
            let cost: f64 = segs
                .iter()
                .map(|&(a, b)| {
                    let s = &values[a..=b];
                    let m = s.iter().sum::<f64>() / s.len() as f64;
                    s.iter().map(|x| (x - m).powi(2)).sum::<f64>() + penalty
                })
                .sum();
            let replace = match &best {
                None => true,
                Some((c, b)) => {
                    if ties(cost, *c) {
                        segs.len() < b.len() || (segs.len() == b.len() && later_is_earlier(&segs, b))
                    } else {
                        cost < *c
                    }
                }
            };
            if replace {
                best = Some((cost, segs));
            }
        }
        best.unwrap().1
    }

    // compares segment starts from the back; smaller wins
    fn later_is_earlier(a: &[(usize, usize)], b: &[(usize, usize)]) -> bool {
        for (x, y) in a.iter().rev().zip(b.iter().rev()) {
            if x.0 != y.0 {
                return x.0 < y.0;
            }
        }
        false
    }

    #[test]
    fn step_splits_in_two() {
        let segs = segment(&[0.0, 0.0, 0.0, 5.0, 5.0, 5.0], 0.1);
        let spans: Vec<_> = segs.iter().map(|s| (s.first, s.last)).collect();
        assert_eq!(spans, vec![(0, 2), (3, 5)]);
        assert_eq!(brute_force(&[0.0, 0.0, 0.0, 5.0, 5.0, 5.0], 0.1), spans);
    }

    #[test]
    fn constant_and_heavy_penalty() {
        assert_eq!(segment(&[0.3; 9], 1e-6).len(), 1);
        assert_eq!(segment(&[0.0, 9.0, -4.0, 2.0], 1e12).len(), 1);
        assert_eq!(segment(&[0.3; 9], 0.0).len(), 1);
    }

    #[test]
    fn residual_arithmetic() {
        let s = |v: Vec<f64>| PerformanceSeries::new(start(), v, "x").unwrap();
        let f = |v: Vec<f64>| BaselineForecast::supplied(start(), v).unwrap();
        let r = residuals(&s(vec![1.0, 2.0]), &f(vec![2.0, 2.0])).unwrap();
        assert_eq!(r.loss, vec![1.0, 0.0]);
        assert_eq!(r.relative_loss, vec![0.5, 0.0]);
        let r = residuals(&s(vec![2.0, 3.0, 6.0]), &f(vec![2.0, 4.0, 6.0])).unwrap();
        assert_eq!(r.relative_loss, vec![0.0, 0.25, 0.0]);
        let r = residuals(&s(vec![3.0, 4.0]), &f(vec![3.0, 4.0])).unwrap();
        assert!(r.loss.iter().all(|l| *l == 0.0));
        assert!(matches!(
            residuals(&s(vec![1.0, 2.0]), &f(vec![1.0, 2.0, 3.0])),
            Err(DetectError::AlignmentMismatch { .. })
        ));
    }

    #[test]
    fn two_bumps() {
        let rel = [0.0, 0.1, 0.3, 0.1, 0.0, 0.0, 0.08, 0.2, 0.1, 0.0];
        let res = from_relative(&rel);
        let opts = DetectOptions::default();
        let (_, windows) = detect(&res, &opts);
        let got: Vec<_> = windows
            .iter()
            .map(|w| (w.start_index, w.end_index, w.peak_index, w.recovery_observed))
            .collect();
        assert_eq!(got, vec![(1, 4, 2, true), (6, 9, 7, true)]);
    }

    #[test]
    fn admission_criteria() {
        let opts = DetectOptions::default();
        let small = from_relative(&[0.0, 0.01, 0.03, 0.04, 0.02, 0.0, 0.0]);
        assert!(detect(&small, &opts).1.is_empty());
        let short = from_relative(&[0.0, 0.0, 0.3, 0.5, 0.0, 0.0, 0.0]);
        assert!(detect(&short, &opts).1.is_empty());
        let exact = from_relative(&[0.0, 0.05, 0.05, 0.05, 0.0]);
        assert_eq!(detect(&exact, &opts).1.len(), 1);
    }

    #[test]
    fn truncated_window() {
        let res = from_relative(&[0.0, 0.0, 0.1, 0.2, 0.3]);
        let (_, windows) = detect(&res, &DetectOptions::default());
        assert_eq!(windows.len(), 1);
        assert!(!windows[0].recovery_observed);
        assert_eq!(windows[0].end_index, 5);
        assert_eq!(windows[0].peak_index, 4);
    }

    #[test]
    fn peak_ties_resolve_early_and_split_is_a_boundary() {
        let res = from_relative(&[0.0, 0.2, 0.4, 0.4, 0.4, 0.1, 0.1, 0.0]);
        let segs = segment(&res.relative_loss, 0.001);
        let w = &extract_windows(&res, &segs, &DetectOptions::default())[0];
        assert_eq!(w.peak_index, 2);
        assert!(segs.iter().any(|s| s.first == w.split_index));
        assert_eq!(w.split_index, 2);
    }

    #[test]
    fn noisy_tail_stops_at_upturn() {
        // .03 after .02 is noise, not a decaying tail
        let rel = [-0.01, 0.01, 0.1, 0.3, 0.2, 0.04, 0.02, 0.03, 0.01, -0.01];
        let res = from_relative(&rel);
        let cands = candidate_windows(&res, &segment(&rel, 0.01), 0.05);
        let spans: Vec<_> = cands.iter().map(|w| (w.start_index, w.end_index)).collect();
        assert_eq!(spans, vec![(1, 7), (7, 9)]);
        let (_, windows) = detect(&res, &DetectOptions::default());
        assert_eq!(windows.len(), 1);
        assert_eq!((windows[0].start_index, windows[0].end_index), (1, 7));
    }

    #[test]
    fn auto_penalty_scale() {
        // |Δ| = [.1,.2,.2,.1,0,.08,.12,.1,.1] → median .1
        let rel = [0.0, 0.1, 0.3, 0.1, 0.0, 0.0, 0.08, 0.2, 0.1, 0.0];
        assert!((auto_penalty(&rel) - 0.2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn dp_matches_enumeration(
            values in prop::collection::vec(-2.0f64..2.0, 2..11),
            penalty in 0.0f64..1.0,
        ) {
            let dp: Vec<_> = segment(&values, penalty).iter().map(|s| (s.first, s.last)).collect();
            prop_assert_eq!(dp, brute_force(&values, penalty));
        }

        #[test]
        fn dp_matches_enumeration_with_ties(
            values in prop::collection::vec(0i32..3, 2..11),
            penalty in prop::sample::select(vec![0.0, 0.5, 1.0, 2.0]),
        ) {
            let values: Vec<f64> = values.into_iter().map(f64::from).collect();
            let dp: Vec<_> = segment(&values, penalty).iter().map(|s| (s.first, s.last)).collect();
            prop_assert_eq!(dp, brute_force(&values, penalty));
        }

        #[test]
        fn windows_disjoint_admissible_and_covering(
            rel in prop::collection::vec(-0.1f64..0.3, 2..60),
        ) {
            let res = from_relative(&rel);
            let opts = DetectOptions::default();
            let (segs, windows) = detect(&res, &opts);
            for w in &windows {
                prop_assert!(w.duration() >= 3);
                prop_assert!(w.peak_relative_loss >= 0.05);
                prop_assert!(w.start_index <= w.peak_index && w.peak_index < w.end_index);
            }
            for pair in windows.windows(2) {
                prop_assert!(pair[0].end_index <= pair[1].start_index);
            }
            let cands = candidate_windows(&res, &segs, opts.min_peak_ratio);
            for (t, &r) in rel.iter().enumerate() {
                if r >= opts.min_peak_ratio {
                    prop_assert!(cands.iter().any(|w| w.start_index <= t && t < w.end_index));
                }
            }
        }

        #[test]
        fn rescaling_keeps_windows(
            pattern in prop::collection::vec(0.0f64..0.4, 8..40),
            scale in 0.01f64..100.0,
        ) {
            let s = |v: Vec<f64>| PerformanceSeries::new(start(), v, "x").unwrap();
            let f = |v: Vec<f64>| BaselineForecast::supplied(start(), v).unwrap();
            let p: Vec<f64> = (0..pattern.len()).map(|t| 10.0 + t as f64).collect();
            let o: Vec<f64> = p.iter().zip(&pattern).map(|(p, l)| p * (1.0 - l)).collect();
            let a = residuals(&s(o.clone()), &f(p.clone())).unwrap();
            let b = residuals(
                &s(o.iter().map(|v| v * scale).collect()),
                &f(p.iter().map(|v| v * scale).collect()),
            ).unwrap();
            let opts = DetectOptions::default();
            let wa: Vec<_> = detect(&a, &opts).1.iter().map(|w| (w.start_index, w.end_index)).collect();
            let wb: Vec<_> = detect(&b, &opts).1.iter().map(|w| (w.start_index, w.end_index)).collect();
            prop_assert_eq!(wa, wb);
        }
    }
}
