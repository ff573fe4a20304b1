//! Synthetic scenarios with known disruptions.
//!
//! A scenario multiplies a trend by a sinusoidal season,
//! `P(t) = trend(t) · (1 + A · sin(2πt/12))`, subtracts the injected beta
//! curves and applies multiplicative Gaussian noise,
//! `O(t) = (P(t) − Σ loss_i(t)) · (1 + ε_t)`. The generator is seeded, so a
//! spec always produces the same series. The true indices come from the
//! injected parameters and closed-form loss integrals.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::CovariateSeries;
use crate::betafit::{beta_loss, beta_loss_integral_between, BetaDisruptionParams, Rates};
use crate::detect::FOOTPRINT_FRACTION;
use crate::indices::{adaptability_from_rates, IndexPair};
use crate::pipeline::ResilienceReport;
use crate::series::{MonthStamp, PerformanceSeries};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("disruptions {first} and {second} overlap")]
    OverlappingDisruptions { first: usize, second: usize },
    #[error("disruption {index} does not fit inside the {horizon}-month horizon")]
    OutsideHorizon { index: usize, horizon: usize },
    #[error("injected loss exceeds the baseline at month {month}")]
    LossExceedsBaseline { month: usize },
    #[error("disruption {index} fails the admission criteria ({reason}); mark it as a decoy if intended")]
    Inadmissible { index: usize, reason: String },
}

fn default_label() -> String {
    "synthetic".to_string()
}

fn default_start() -> MonthStamp {
    MonthStamp::new(2017, 1).expect("valid month")
}

fn one() -> f64 {
    1.0
}

/// Long-run level of the expected series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trend {
    Linear {
        #[serde(default = "one")]
        level: f64,
        #[serde(default)]
        slope: f64,
    },
    /// `a + (k − a) / (1 + q·e^(−b·t))^(1/nu)`.
    Logistic { a: f64, k: f64, q: f64, b: f64, nu: f64 },
}

impl Trend {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Trend::Linear { level, slope } => level + slope * t,
            Trend::Logistic { a, k, q, b, nu } => a + (k - a) * (-(q * (-b * t).exp()).ln_1p() / nu).exp(),
        }
    }
}

/// One injected disruption. `start` is the onset in months from the first
/// month of the series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectedDisruption {
    pub alpha: f64,
    pub theta: f64,
    pub vartheta: f64,
    pub duration: f64,
    pub start: f64,
    /// Decoys are exempt from the admission check and must not be reported.
    #[serde(default)]
    pub decoy: bool,
}

impl InjectedDisruption {
    pub fn params(&self) -> Result<BetaDisruptionParams, SynthError> {
        BetaDisruptionParams::new(self.alpha, self.theta, self.vartheta, self.duration, self.start)
            .map_err(|e| SynthError::InvalidSpec(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(default = "default_label")]
    pub label: String,
    #[serde(default = "default_start")]
    pub start: MonthStamp,
    pub horizon: usize,
    pub trend: Trend,
    /// Fraction of the trend level.
    #[serde(default)]
    pub seasonal_amplitude: f64,
    /// Standard deviation of the multiplicative noise.
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub disruptions: Vec<InjectedDisruption>,
    #[serde(default)]
    pub seed: u64,
}

/// Admission thresholds a non-decoy disruption must meet on the sampled
/// months. Only months with at least [`FOOTPRINT_FRACTION`] of the peak
/// relative loss count towards the duration.
pub const MIN_DURATION: usize = 3;
pub const MIN_PEAK_RATIO: f64 = 0.05;

/// Ground truth for one injected disruption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueDisruption {
    pub params: BetaDisruptionParams,
    pub rates: Rates,
    /// Total lost performance under the curve.
    pub loss_integral: f64,
    /// First month with positive loss.
    pub start_index: usize,
    /// First month back at zero loss.
    pub end_index: usize,
    pub peak_relative_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTruth {
    pub spec: ScenarioSpec,
    pub expected: PerformanceSeries,
    pub observed: PerformanceSeries,
    /// Physician counts proportional to the trend, for the covariate
    /// baseline.
    pub covariates: CovariateSeries,
    /// Admissible disruptions, in time order.
    pub disruptions: Vec<TrueDisruption>,
    pub decoys: Vec<TrueDisruption>,
    /// Analysis span `[first onset, last end]` in months, clipped to the
    /// series.
    pub span: Option<(f64, f64)>,
    pub true_indices: IndexPair,
}

/// The JSON form of a [`ScenarioTruth`], without the series themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub spec: ScenarioSpec,
    pub disruptions: Vec<TrueDisruption>,
    pub decoys: Vec<TrueDisruption>,
    pub span: Option<(f64, f64)>,
    pub true_indices: IndexPair,
}

impl ScenarioTruth {
    pub fn record(&self) -> TruthRecord {
        TruthRecord {
            spec: self.spec.clone(),
            disruptions: self.disruptions.clone(),
            decoys: self.decoys.clone(),
            span: self.span,
            true_indices: self.true_indices.clone(),
        }
    }
}

const COVARIATE_POPULATION: f64 = 1.0e6;
const COVARIATE_PHYSICIANS_PER_LEVEL: f64 = 1.0e3;
const SIMPSON_PANELS_PER_MONTH: usize = 64;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let panels = (((b - a) * SIMPSON_PANELS_PER_MONTH as f64).ceil() as usize).max(2);
    let panels = panels + panels % 2;
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for i in 1..panels {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

fn validate(spec: &ScenarioSpec) -> Result<(), SynthError> {
    let bad = |m: &str| Err(SynthError::InvalidSpec(m.to_string()));
    if spec.horizon < 2 {
        return bad("horizon must be at least 2 months");
    }
    if !(spec.noise_sd.is_finite() && spec.noise_sd >= 0.0) {
        return bad("noise_sd must be finite and non-negative");
    }
    if !(spec.seasonal_amplitude.is_finite() && spec.seasonal_amplitude.abs() < 1.0) {
        return bad("seasonal_amplitude must lie in (-1, 1)");
    }
    let trend_ok = (0..spec.horizon).all(|t| {
        let v = spec.trend.at(t as f64);
        v.is_finite() && v > 0.0
    });
    if !trend_ok {
        return bad("trend must be positive over the horizon");
    }
    Ok(())
}

/// Builds the scenario's series and ground truth.
pub fn generate(spec: &ScenarioSpec) -> Result<ScenarioTruth, SynthError> {
    validate(spec)?;
    let n = spec.horizon;
    let last = (n - 1) as f64;

    let mut order: Vec<usize> = (0..spec.disruptions.len()).collect();
    order.sort_by(|&a, &b| spec.disruptions[a].start.total_cmp(&spec.disruptions[b].start));
    let mut params = Vec::with_capacity(order.len());
    for &i in &order {
        let p = spec.disruptions[i].params()?;
        if p.start < 0.0 || p.end() > last {
            return Err(SynthError::OutsideHorizon { index: i, horizon: n });
        }
        params.push((i, p));
    }
    for pair in params.windows(2) {
        if pair[1].1.start < pair[0].1.end() {
            return Err(SynthError::OverlappingDisruptions {
                first: pair[0].0,
                second: pair[1].0,
            });
        }
    }

    let season = |t: f64| 1.0 + spec.seasonal_amplitude * (2.0 * std::f64::consts::PI * t / 12.0).sin();
    let expected_at = |t: f64| spec.trend.at(t) * season(t);
    let expected: Vec<f64> = (0..n).map(|t| expected_at(t as f64)).collect();
    let total_loss = |t: f64| params.iter().map(|(_, p)| beta_loss(p, t)).sum::<f64>();

    let mut clean = Vec::with_capacity(n);
    for (t, &p) in expected.iter().enumerate() {
        let v = p - total_loss(t as f64);
        if v < 0.0 {
            return Err(SynthError::LossExceedsBaseline { month: t });
        }
        clean.push(v);
    }
    let observed: Vec<f64> = if spec.noise_sd > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sd).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
        clean
            .iter()
            .map(|v| (v * (1.0 + normal.sample(&mut rng))).max(0.0))
            .collect()
    } else {
        clean
    };

    let mut disruptions = Vec::new();
    let mut decoys = Vec::new();
    for &(i, p) in &params {
        let footprint: Vec<usize> = (0..n).filter(|&t| beta_loss(&p, t as f64) > 0.0).collect();
        let peak_relative_loss = footprint
            .iter()
            .map(|&t| beta_loss(&p, t as f64) / expected[t])
            .fold(0.0, f64::max);
        let truth = TrueDisruption {
            params: p,
            rates: p.rates(),
            loss_integral: crate::betafit::beta_loss_integral(&p),
            start_index: footprint.first().copied().unwrap_or(p.start.ceil() as usize),
            end_index: footprint.last().map_or(p.end().ceil() as usize, |&t| t + 1),
            peak_relative_loss,
        };
        if spec.disruptions[i].decoy {
            decoys.push(truth);
            continue;
        }
        let material = footprint
            .iter()
            .filter(|&&t| beta_loss(&p, t as f64) / expected[t] >= FOOTPRINT_FRACTION * peak_relative_loss)
            .count();
        if material < MIN_DURATION {
            return Err(SynthError::Inadmissible {
                index: i,
                reason: format!("{material} months of material loss"),
            });
        }
        if peak_relative_loss < MIN_PEAK_RATIO {
            return Err(SynthError::Inadmissible {
                index: i,
                reason: format!("peak relative loss {peak_relative_loss:.4}"),
            });
        }
        disruptions.push(truth);
    }

    let span = match (disruptions.first(), disruptions.last()) {
        (Some(a), Some(b)) => Some((a.params.start, b.params.end().min(last))),
        _ => None,
    };
    let (rho, r) = match span {
        None => (1.0, 1.0),
        Some((s, e)) => {
            let rates: Vec<f64> = disruptions.iter().map(|d| d.rates.u).collect();
            let lost: f64 = params.iter().map(|(_, p)| beta_loss_integral_between(p, s, e)).sum();
            let base = simpson(expected_at, s, e);
            (adaptability_from_rates(&rates, 1.0), (1.0 - lost / base).clamp(0.0, 1.0))
        }
    };

    let physicians = (0..n)
        .map(|t| spec.trend.at(t as f64) * COVARIATE_PHYSICIANS_PER_LEVEL)
        .collect();
    let covariates = CovariateSeries::new(spec.start, physicians, COVARIATE_POPULATION)
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let series = |values: Vec<f64>| {
        PerformanceSeries::new(spec.start, values, spec.label.clone())
            .map_err(|e| SynthError::InvalidSpec(e.to_string()))
    };
    Ok(ScenarioTruth {
        expected: series(expected)?,
        observed: series(observed)?,
        covariates,
        true_indices: IndexPair::new(spec.label.clone(), rho, r, disruptions.len()),
        disruptions,
        decoys,
        span,
        spec: spec.clone(),
    })
}

/// Absolute and relative error of one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorPair {
    pub abs: f64,
    pub rel: f64,
}

impl ErrorPair {
    pub fn of(estimate: f64, truth: f64) -> Self {
        let abs = (estimate - truth).abs();
        Self {
            abs,
            rel: abs / truth.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisruptionErrors {
    pub alpha: ErrorPair,
    pub theta: ErrorPair,
    pub vartheta: ErrorPair,
    pub duration: ErrorPair,
    pub u: ErrorPair,
    pub v: ErrorPair,
    /// Reported minus true first month of loss.
    pub start_offset: i64,
    /// Reported minus true first month back on target.
    pub end_offset: i64,
}

/// How far a report lies from the scenario's truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineErrors {
    pub expected_count: usize,
    pub reported_count: usize,
    /// Per-disruption errors, in time order; empty when the counts differ.
    pub disruptions: Vec<DisruptionErrors>,
    pub rho: f64,
    pub r: f64,
}

impl PipelineErrors {
    pub fn count_matches(&self) -> bool {
        self.expected_count == self.reported_count
    }

    /// Largest boundary offset in months, either side.
    pub fn max_boundary_offset(&self) -> i64 {
        self.disruptions
            .iter()
            .map(|d| d.start_offset.abs().max(d.end_offset.abs()))
            .max()
            .unwrap_or(0)
    }
}

/// Compares a report made from `truth.observed` against the truth.
///
/// Amplitudes are compared after dividing the true ones by the report's
/// origin scale.
pub fn evaluate_pipeline(truth: &ScenarioTruth, report: &ResilienceReport) -> PipelineErrors {
    let expected_count = truth.disruptions.len();
    let reported_count = report.disruptions.len();
    let series_start = truth.observed.start();
    let mut disruptions = Vec::new();
    if expected_count == reported_count && report.windows.len() == reported_count {
        for ((t, f), w) in truth.disruptions.iter().zip(&report.disruptions).zip(&report.windows) {
            disruptions.push(DisruptionErrors {
                alpha: ErrorPair::of(f.alpha, t.params.alpha / report.origin_scale),
                theta: ErrorPair::of(f.theta, t.params.theta),
                vartheta: ErrorPair::of(f.vartheta, t.params.vartheta),
                duration: ErrorPair::of(f.duration_months, t.params.duration),
                u: ErrorPair::of(f.u, t.rates.u),
                v: ErrorPair::of(f.v, t.rates.v),
                start_offset: series_start.months_until(w.start_month) - t.start_index as i64,
                end_offset: series_start.months_until(w.end_month) - t.end_index as i64,
            });
        }
    }
    PipelineErrors {
        expected_count,
        reported_count,
        disruptions,
        rho: (report.indices.rho - truth.true_indices.rho).abs(),
        r: (report.indices.r - truth.true_indices.r).abs(),
    }
}
