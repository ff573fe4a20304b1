//! Adaptability index ρ and resilience index r.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::BaselineForecast;
use crate::betafit::{beta_loss, beta_loss_integral_between, FittedDisruption};
use crate::series::PerformanceSeries;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndexError {
    #[error("profile has no disruptions")]
    NoDisruptions,
    #[error("no disruption has an observed recovery")]
    NoReliableRecoveries,
    #[error("analysis span is empty")]
    EmptySpan,
    #[error("observed and forecast series are not aligned")]
    AlignmentMismatch,
}

/// The fitted disruptions of one series, in time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisruptionProfile {
    pub label: String,
    pub disruptions: Vec<FittedDisruption>,
}

impl DisruptionProfile {
    pub fn new(label: impl Into<String>, mut disruptions: Vec<FittedDisruption>) -> Self {
        disruptions.sort_by(|a, b| a.params.start.total_cmp(&b.params.start));
        Self {
            label: label.into(),
            disruptions,
        }
    }

    pub fn len(&self) -> usize {
        self.disruptions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.disruptions.is_empty()
    }

    /// Month range from the first onset to the last recovery (or the final
    /// month of a series of length `len`), both ends inclusive.
    pub fn analysis_span(&self, len: usize) -> Option<(usize, usize)> {
        let first = self.disruptions.first()?;
        let last = self.disruptions.last()?;
        let s = first.window.onset_index();
        let e = last.window.end_index.min(len.saturating_sub(1));
        (s < e).then_some((s, e))
    }

    fn window_spans(&self, len: usize) -> Vec<(usize, usize)> {
        self.disruptions
            .iter()
            .map(|d| (d.window.onset_index(), d.window.end_index.min(len.saturating_sub(1))))
            .filter(|(s, e)| s < e)
            .collect()
    }
}

/// Which rate the adaptability index compares across consecutive disruptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoBasis {
    /// Disruption rate `u`; a slower later disruption counts as adaptation.
    #[default]
    Disruption,
    /// Recovery rate `v`, over disruptions with an observed recovery only;
    /// a faster later recovery counts as adaptation.
    Recovery,
}

/// Mean normalized change between consecutive rates. A single disruption
/// scores 1.
pub fn adaptability(profile: &DisruptionProfile, basis: RhoBasis) -> Result<f64, IndexError> {
    if profile.is_empty() {
        return Err(IndexError::NoDisruptions);
    }
    let rates: Vec<f64> = match basis {
        RhoBasis::Disruption => profile.disruptions.iter().map(|d| d.rates.u).collect(),
        RhoBasis::Recovery => profile
            .disruptions
            .iter()
            .filter(|d| d.recovery_reliable)
            .map(|d| d.rates.v)
            .collect(),
    };
    if rates.is_empty() {
        return Err(IndexError::NoReliableRecoveries);
    }
    let sign = match basis {
        RhoBasis::Disruption => 1.0,
        RhoBasis::Recovery => -1.0,
    };
    Ok(adaptability_from_rates(&rates, sign))
}

/// `ρ` from a rate sequence; `sign = 1` rewards decreasing rates.
pub fn adaptability_from_rates(rates: &[f64], sign: f64) -> f64 {
    if rates.len() < 2 {
        return 1.0;
    }
    let terms: f64 = rates
        .windows(2)
        .map(|w| -sign * (w[1] - w[0]) / w[1].max(w[0]))
        .sum();
    terms / (rates.len() - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanMode {
    /// One interval from the first onset to the last recovery.
    #[default]
    Contiguous,
    /// Only the months inside each disruption.
    Windows,
}

/// How the loss integral is evaluated on monthly samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// Trapezoid rule on the clipped residual.
    Trapezoid,
    /// Trapezoid rule plus, for every fitted curve, the difference between its
    /// exact integral and its own trapezoid sum over the span. Removes the
    /// sampling error of the curve shape while leaving whatever the curves do
    /// not explain under the plain trapezoid rule.
    #[default]
    CurveCorrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResilienceOptions {
    pub span: SpanMode,
    pub quadrature: Quadrature,
}

fn trapezoid(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    if v.len() < 2 {
        return 0.0;
    }
    v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1])
}

/// `r = 1 − ∫(P − O)⁺ / ∫P` over the analysis span, clamped to [0, 1].
pub fn resilience(
    observed: &PerformanceSeries,
    forecast: &BaselineForecast,
    profile: &DisruptionProfile,
    options: ResilienceOptions,
) -> Result<f64, IndexError> {
    let n = observed.len();
    if forecast.values().len() != n || forecast.start() != observed.start() {
        return Err(IndexError::AlignmentMismatch);
    }
    let spans = match options.span {
        SpanMode::Contiguous => profile.analysis_span(n).into_iter().collect(),
        SpanMode::Windows => profile.window_spans(n),
    };
    if spans.is_empty() {
        return Err(IndexError::EmptySpan);
    }
    let (o, p) = (observed.values(), forecast.values());
    let mut lost = 0.0;
    let mut expected = 0.0;
    for &(s, e) in &spans {
        lost += trapezoid((s..=e).map(|t| (p[t] - o[t]).max(0.0)));
        expected += trapezoid((s..=e).map(|t| p[t]));
        if options.quadrature == Quadrature::CurveCorrected {
            for d in &profile.disruptions {
                let sampled = trapezoid((s..=e).map(|t| beta_loss(&d.params, t as f64)));
                lost += beta_loss_integral_between(&d.params, s as f64, e as f64) - sampled;
            }
        }
    }
    if !(expected > 0.0) {
        return Err(IndexError::EmptySpan);
    }
    Ok((1.0 - lost / expected).clamp(0.0, 1.0))
}

/// Thresholds above which ρ and r count as high (strict inequality).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub adaptability: f64,
    pub resilience: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            adaptability: 0.5,
            resilience: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexPair {
    pub label: String,
    pub rho: f64,
    pub r: f64,
    pub n_disruptions: usize,
    pub high_adaptability: bool,
    pub high_resilience: bool,
}

impl IndexPair {
    pub fn new(label: impl Into<String>, rho: f64, r: f64, n_disruptions: usize) -> Self {
        classify(
            Self {
                label: label.into(),
                rho,
                r,
                n_disruptions,
                high_adaptability: false,
                high_resilience: false,
            },
            Thresholds::default(),
        )
    }
}

pub fn classify(mut pair: IndexPair, thresholds: Thresholds) -> IndexPair {
    pair.high_adaptability = pair.rho > thresholds.adaptability;
    pair.high_resilience = pair.r > thresholds.resilience;
    pair
}

/// Both indices for a profile. Without disruptions ρ = r = 1.
pub fn compute_indices(
    observed: &PerformanceSeries,
    forecast: &BaselineForecast,
    profile: &DisruptionProfile,
    basis: RhoBasis,
    options: ResilienceOptions,
    thresholds: Thresholds,
) -> Result<IndexPair, IndexError> {
    let (rho, r) = if profile.is_empty() {
        (1.0, 1.0)
    } else {
        (
            adaptability(profile, basis)?,
            resilience(observed, forecast, profile, options)?,
        )
    };
    Ok(classify(
        IndexPair {
            label: profile.label.clone(),
            rho,
            r,
            n_disruptions: profile.len(),
            high_adaptability: false,
            high_resilience: false,
        },
        thresholds,
    ))
}
