//! Beta-family disruption curves and their fitting.
//!
//! A disruption starting at `t_s` with duration `T` removes
//!
//! ```text
//! loss(t) = α · C(θ, ϑ) · τ^θ · (1 − τ)^ϑ,   τ = (t − t_s) / T ∈ (0, 1)
//! C(θ, ϑ) = (θ + ϑ)^(θ + ϑ) / (θ^θ · ϑ^ϑ)
//! ```
//!
//! from the expected performance. `C` normalizes the curve so that its
//! maximum, reached at `τ* = θ / (θ + ϑ)`, is exactly `α`.

pub mod optimize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::BaselineForecast;
use crate::detect::DisruptionWindow;
use crate::series::{MonthStamp, PerformanceSeries};
use crate::special::{ln_beta, regularized_incomplete_beta};
use optimize::{minimize, Bounds, MinimizeOptions, OptimizeError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("curve parameters must be strictly positive and finite: {0}")]
    InvalidParams(String),
    #[error("window {start}..{end} has no positive loss")]
    DegenerateWindow { start: usize, end: usize },
    #[error("window {start}..{end} does not fit a series of length {len}")]
    WindowOutOfRange { start: usize, end: usize, len: usize },
    #[error("observed and forecast series are not aligned")]
    AlignmentMismatch,
    #[error("fit failed: {0}")]
    FitFailed(#[from] OptimizeError),
}

/// Parameters of one disruption curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaDisruptionParams {
    pub alpha: f64,
    pub theta: f64,
    pub vartheta: f64,
    /// Duration `T` in months.
    pub duration: f64,
    /// Month index `t_s` where the curve leaves zero.
    pub start: f64,
}

impl BetaDisruptionParams {
    pub fn new(
        alpha: f64,
        theta: f64,
        vartheta: f64,
        duration: f64,
        start: f64,
    ) -> Result<Self, FitError> {
        let p = Self {
            alpha,
            theta,
            vartheta,
            duration,
            start,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let positive = [self.alpha, self.theta, self.vartheta, self.duration];
        if positive.iter().all(|v| v.is_finite() && *v > 0.0) && self.start.is_finite() {
            Ok(())
        } else {
            Err(FitError::InvalidParams(format!("{self:?}")))
        }
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    /// Fraction of the duration elapsed at the peak.
    pub fn peak_fraction(&self) -> f64 {
        self.theta / (self.theta + self.vartheta)
    }

    pub fn peak_time(&self) -> f64 {
        self.start + self.duration * self.peak_fraction()
    }

    pub fn rates(&self) -> Rates {
        Rates {
            u: 1.0 / (self.theta * self.duration),
            v: 1.0 / (self.vartheta * self.duration),
        }
    }
}

/// Disruption rate `u = 1/(θT)` and recovery rate `v = 1/(ϑT)`, per month.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub u: f64,
    pub v: f64,
}

/// `ln C(θ, ϑ)`.
pub fn ln_normalizer(theta: f64, vartheta: f64) -> f64 {
    let s = theta + vartheta;
    s * s.ln() - theta * theta.ln() - vartheta * vartheta.ln()
}

/// Loss removed by the curve at month `t` (fractional months allowed).
pub fn beta_loss(params: &BetaDisruptionParams, t: f64) -> f64 {
    let tau = (t - params.start) / params.duration;
    if !(tau > 0.0 && tau < 1.0) {
        return 0.0;
    }
    let ln = ln_normalizer(params.theta, params.vartheta)
        + params.theta * tau.ln()
        + params.vartheta * (-tau).ln_1p();
    params.alpha * ln.exp()
}

/// Area under the curve, `α · C · T · B(θ + 1, ϑ + 1)`.
pub fn beta_loss_integral(params: &BetaDisruptionParams) -> f64 {
    let ln = ln_normalizer(params.theta, params.vartheta)
        + params.duration.ln()
        + ln_beta(params.theta + 1.0, params.vartheta + 1.0);
    params.alpha * ln.exp()
}

/// Area under the curve between months `from` and `to`.
pub fn beta_loss_integral_between(params: &BetaDisruptionParams, from: f64, to: f64) -> f64 {
    let to_tau = |t: f64| ((t - params.start) / params.duration).clamp(0.0, 1.0);
    let (lo, hi) = (to_tau(from), to_tau(to));
    if hi <= lo {
        return 0.0;
    }
    let (a, b) = (params.theta + 1.0, params.vartheta + 1.0);
    // the incomplete beta only fails for extreme shapes; fall back to τ-linear
    let cdf = |x: f64| regularized_incomplete_beta(x, a, b).unwrap_or(x);
    let fraction = if lo == 0.0 && hi == 1.0 { 1.0 } else { cdf(hi) - cdf(lo) };
    beta_loss_integral(params) * fraction
}

/// A detected window together with its fitted curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedDisruption {
    pub window: DisruptionWindow,
    pub params: BetaDisruptionParams,
    pub rates: Rates,
    pub sse: f64,
    /// False when the recovery was cut off by the end of the series.
    pub recovery_reliable: bool,
}

impl FittedDisruption {
    pub fn record(&self, series_start: MonthStamp) -> FittedRecord {
        FittedRecord {
            start_month: series_start.offset(self.params.start.round() as i64),
            duration_months: self.params.duration,
            alpha: self.params.alpha,
            theta: self.params.theta,
            vartheta: self.params.vartheta,
            u: self.rates.u,
            v: self.rates.v,
            sse: self.sse,
            recovery_reliable: self.recovery_reliable,
        }
    }
}

/// Flat export form of a [`FittedDisruption`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedRecord {
    pub start_month: MonthStamp,
    pub duration_months: f64,
    pub alpha: f64,
    pub theta: f64,
    pub vartheta: f64,
    pub u: f64,
    pub v: f64,
    pub sse: f64,
    pub recovery_reliable: bool,
}

pub const SHAPE_MIN: f64 = 0.05;
pub const SHAPE_MAX: f64 = 50.0;
const SHAPE_SUMS: [f64; 3] = [2.0, 6.0, 12.0];
const TRUNCATED_DURATION_STARTS: [f64; 2] = [1.25, 2.0];

/// How far the fit may move detected boundaries and how many on-target
/// months around a window it scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Onset and end candidates are tried up to this many months either side
    /// of the detected boundaries.
    pub boundary_slack: usize,
    /// Months outside the window, on each side, included in every candidate's
    /// SSE so that curves spilling past the loss are penalized.
    pub context_months: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            boundary_slack: 2,
            context_months: 3,
        }
    }
}

/// Fits a curve to the loss `P(t) − O(t)` inside `window` with default
/// options and no neighbouring windows.
pub fn fit_disruption(
    window: &DisruptionWindow,
    observed: &PerformanceSeries,
    forecast: &BaselineForecast,
) -> Result<FittedDisruption, FitError> {
    let n = observed.len();
    fit_disruption_within(window, observed, forecast, (0, n), FitOptions::default())
}

/// Fits every window, keeping each fit clear of its neighbours.
pub fn fit_disruptions(
    windows: &[DisruptionWindow],
    observed: &PerformanceSeries,
    forecast: &BaselineForecast,
    options: FitOptions,
) -> Vec<Result<FittedDisruption, FitError>> {
    let n = observed.len();
    windows
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let lo = if i > 0 { windows[i - 1].end_index } else { 0 };
            let hi = windows.get(i + 1).map_or(n, |next| next.start_index);
            fit_disruption_within(w, observed, forecast, (lo, hi), options)
        })
        .collect()
}

/// Fits a curve to the loss `P(t) − O(t)` around `window`, using only months
/// in the half-open range `limits`.
///
/// A curve starts at an onset month, where it leaves zero, and returns to
/// zero at its end month. Detection places the onset at the last on-target
/// month before the loss and the end at the first month back on target, but
/// noise near zero loss can move either by a month or two. Every integer
/// onset and end within `boundary_slack` of the detected ones is therefore
/// tried with the duration fixed to `end − onset`, and the candidate with
/// the lowest SSE over the window plus `context_months` either side wins
/// (the detected boundaries on ties). For a truncated window the end is
/// unknown: the duration is fitted within `[span, 3·span]`, `span` being the
/// months from onset to the series end.
pub fn fit_disruption_within(
    window: &DisruptionWindow,
    observed: &PerformanceSeries,
    forecast: &BaselineForecast,
    limits: (usize, usize),
    options: FitOptions,
) -> Result<FittedDisruption, FitError> {
    let n = observed.len();
    if forecast.values().len() != n || forecast.start() != observed.start() {
        return Err(FitError::AlignmentMismatch);
    }
    let (lo, hi) = (limits.0, limits.1.min(n));
    if window.start_index >= window.end_index
        || window.end_index > n
        || window.start_index < lo
        || window.end_index > hi
    {
        return Err(FitError::WindowOutOfRange {
            start: window.start_index,
            end: window.end_index,
            len: n,
        });
    }
    // a loss already present in the first month puts the onset before it
    let onset = window.start_index as i64 - 1;
    let peak = window.peak_index;
    let loss = |t: usize| forecast.values()[t] - observed.values()[t];
    let peak_loss = (window.start_index..window.end_index)
        .map(loss)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(peak_loss > 0.0) {
        return Err(FitError::DegenerateWindow {
            start: window.start_index,
            end: window.end_index,
        });
    }
    let first = window.start_index.saturating_sub(options.context_months + 1).max(lo);
    let last = (window.end_index + options.context_months).min(hi - 1);
    let samples: Vec<(f64, f64)> = (first..=last).map(|t| (t as f64, loss(t))).collect();
    let sse_of = |p: &BetaDisruptionParams| -> f64 {
        samples
            .iter()
            .map(|&(t, l)| (l - beta_loss(p, t)).powi(2))
            .sum()
    };

    // detected boundaries first, so that they win ties
    let slack = options.boundary_slack as i64;
    let shifts = std::iter::once(0).chain((-slack..=slack).filter(|&d| d != 0));
    let ends: Vec<i64> = if window.recovery_observed {
        shifts.clone().map(|d| window.end_index as i64 + d).collect()
    } else {
        vec![n as i64]
    };
    let mut best: Option<(f64, BetaDisruptionParams)> = None;
    for start in shifts.map(|d| onset + d) {
        for &end in &ends {
            let admissible = start >= onset.min(lo as i64)
                && start < peak as i64
                && end > peak as i64
                && end <= hi as i64
                && end - start > 1;
            if !admissible {
                continue;
            }
            let params = if window.recovery_observed {
                fit_fixed(&sse_of, start as f64, (end - start) as f64, peak, peak_loss)?
            } else {
                fit_open(&sse_of, start as f64, (n as i64 - start) as f64, peak, peak_loss)?
            };
            let sse = sse_of(&params);
            if best.as_ref().is_none_or(|(b, _)| sse < *b * (1.0 - 1e-9)) {
                best = Some((sse, params));
            }
        }
    }
    // the detected boundaries are always admissible
    let (sse, params) = best.expect("detected boundaries admissible");

    Ok(FittedDisruption {
        window: window.clone(),
        rates: params.rates(),
        sse,
        params,
        recovery_reliable: window.recovery_observed,
    })
}

fn fit_fixed(
    sse_of: &impl Fn(&BetaDisruptionParams) -> f64,
    start: f64,
    duration: f64,
    peak: usize,
    peak_loss: f64,
) -> Result<BetaDisruptionParams, FitError> {
    let bounds = Bounds::new(
        vec![0.0, SHAPE_MIN, SHAPE_MIN],
        vec![2.0 * peak_loss, SHAPE_MAX, SHAPE_MAX],
    )?;
    let starts = shape_starts((peak as f64 - start) / duration)
        .map(|(th, vt)| vec![peak_loss, th, vt])
        .collect::<Vec<_>>();
    let objective = |x: &[f64]| {
        sse_of(&BetaDisruptionParams {
            alpha: x[0],
            theta: x[1],
            vartheta: x[2],
            duration,
            start,
        })
    };
    let m = minimize(objective, &bounds, &starts, MinimizeOptions::default())?;
    BetaDisruptionParams::new(m.params[0], m.params[1], m.params[2], duration, start)
}

fn fit_open(
    sse_of: &impl Fn(&BetaDisruptionParams) -> f64,
    start: f64,
    span: f64,
    peak: usize,
    peak_loss: f64,
) -> Result<BetaDisruptionParams, FitError> {
    let bounds = Bounds::new(
        vec![0.0, SHAPE_MIN, SHAPE_MIN, span],
        vec![2.0 * peak_loss, SHAPE_MAX, SHAPE_MAX, 3.0 * span],
    )?;
    let mut starts = Vec::new();
    for k in TRUNCATED_DURATION_STARTS {
        let duration = k * span;
        for (th, vt) in shape_starts((peak as f64 - start) / duration) {
            starts.push(vec![peak_loss, th, vt, duration]);
        }
    }
    let objective = |x: &[f64]| {
        sse_of(&BetaDisruptionParams {
            alpha: x[0],
            theta: x[1],
            vartheta: x[2],
            duration: x[3],
            start,
        })
    };
    let m = minimize(objective, &bounds, &starts, MinimizeOptions::default())?;
    BetaDisruptionParams::new(m.params[0], m.params[1], m.params[2], m.params[3], start)
}

fn shape_starts(peak_fraction: f64) -> impl Iterator<Item = (f64, f64)> {
    let f = peak_fraction.clamp(0.05, 0.95);
    SHAPE_SUMS.into_iter().map(move |s| {
        (
            (f * s).clamp(SHAPE_MIN, SHAPE_MAX),
            ((1.0 - f) * s).clamp(SHAPE_MIN, SHAPE_MAX),
        )
    })
}
