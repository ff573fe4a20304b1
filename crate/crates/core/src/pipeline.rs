//! End-to-end analysis of one series: smooth, normalize, split, forecast the
//! baseline, detect, fit, and reduce to indices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::baseline::{self, BaselineError, BaselineForecast, BaselineKind, BaselineModel, CovariateSeries};
use crate::betafit::{fit_disruptions, FitOptions, FittedDisruption, FittedRecord};
use crate::detect::{detect, residuals, DetectError, DetectOptions, DisruptionWindow, Penalty, WindowRecord};
use crate::indices::{
    compute_indices, DisruptionProfile, IndexError, IndexPair, Quadrature, ResilienceOptions, RhoBasis, SpanMode,
    Thresholds,
};
use crate::series::{moving_average, MonthStamp, PerformanceSeries, SeriesError};

pub const SCHEMA_VERSION: &str = "1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("a cutoff month is required to fit a baseline")]
    CutoffRequired,
    #[error("expected series must cover the same months as the observed series")]
    ExpectedMisaligned,
}

/// Every tunable of an analysis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Trailing moving-average window applied before anything else; 1 keeps
    /// the raw series.
    pub window: usize,
    pub min_duration: usize,
    pub min_peak_ratio: f64,
    pub penalty: Penalty,
    pub span: SpanMode,
    pub quadrature: Quadrature,
    pub rho_basis: RhoBasis,
    /// First month of the disrupted period. The baseline is fitted on the
    /// months before it and detection only looks at the months from it on.
    pub cutoff: Option<MonthStamp>,
    /// Divide both series by the first smoothed observed value.
    pub normalize: bool,
    pub thresholds: Thresholds,
    pub fit: FitOptions,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let detect = DetectOptions::default();
        Self {
            window: 3,
            min_duration: detect.min_duration,
            min_peak_ratio: detect.min_peak_ratio,
            penalty: detect.penalty,
            span: SpanMode::default(),
            quadrature: Quadrature::default(),
            rho_basis: RhoBasis::default(),
            cutoff: None,
            normalize: true,
            thresholds: Thresholds::default(),
            fit: FitOptions::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn detect_options(&self) -> DetectOptions {
        DetectOptions {
            min_duration: self.min_duration,
            min_peak_ratio: self.min_peak_ratio,
            penalty: self.penalty,
        }
    }

    pub fn resilience_options(&self) -> ResilienceOptions {
        ResilienceOptions {
            span: self.span,
            quadrature: self.quadrature,
        }
    }
}

/// Where `P(t)` comes from.
#[derive(Debug, Clone)]
pub enum BaselineSource {
    /// An expected series on the same months as the observed one; it is
    /// smoothed and normalized like the observed series.
    Supplied(PerformanceSeries),
    Fitted {
        kind: BaselineKind,
        covariates: Option<CovariateSeries>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineProvenance {
    /// `supplied` or the fitted model family.
    pub source: String,
    pub model: Option<BaselineModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesInfo {
    pub start: MonthStamp,
    pub end: MonthStamp,
    pub months: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFailure {
    pub window: WindowRecord,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFlags {
    pub no_disruptions: bool,
    /// Disruptions whose recovery the series does not reach.
    pub unrecovered: usize,
    pub fit_failures: usize,
}

/// Run-specific values that are not part of the reproducible content.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub generated_at: String,
}

/// Everything one analysis produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResilienceReport {
    pub schema_version: String,
    pub label: String,
    pub tool_version: String,
    pub series: SeriesInfo,
    pub config: AnalysisConfig,
    pub baseline: BaselineProvenance,
    /// Value the series were divided by; 1 without normalization.
    pub origin_scale: f64,
    pub windows: Vec<WindowRecord>,
    pub disruptions: Vec<FittedRecord>,
    pub fit_failures: Vec<FitFailure>,
    pub indices: IndexPair,
    pub flags: ReportFlags,
    /// SHA-256 of each input file, keyed by role.
    pub input_digests: BTreeMap<String, String>,
    pub metadata: Option<ReportMetadata>,
}

impl ResilienceReport {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// The report plus the series it was computed from, for plotting and
/// inspection.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: ResilienceReport,
    /// Smoothed and normalized observed series.
    pub observed: PerformanceSeries,
    pub forecast: BaselineForecast,
    pub windows: Vec<DisruptionWindow>,
    pub fitted: Vec<FittedDisruption>,
}

impl Analysis {
    pub fn has_fit_failures(&self) -> bool {
        !self.report.fit_failures.is_empty()
    }
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn prepare(series: &PerformanceSeries, window: usize) -> Result<PerformanceSeries, SeriesError> {
    if window <= 1 {
        Ok(series.clone())
    } else {
        moving_average(series, window)
    }
}

fn scaled(series: &PerformanceSeries, scale: f64) -> Result<PerformanceSeries, SeriesError> {
    let values = series.values().iter().map(|v| v / scale).collect();
    PerformanceSeries::new(series.start(), values, series.label())
}

/// Runs the full pipeline on `observed`.
///
/// Windows whose curve fit fails are listed in the report and left out of
/// the indices; every other failure aborts.
pub fn analyze(
    observed: &PerformanceSeries,
    baseline: &BaselineSource,
    config: &AnalysisConfig,
    input_digests: BTreeMap<String, String>,
) -> Result<Analysis, PipelineError> {
    let label = observed.label().to_string();
    let smoothed = prepare(observed, config.window)?;
    let origin_scale = if config.normalize {
        let origin = smoothed.values()[0];
        if origin == 0.0 {
            return Err(SeriesError::ZeroOrigin.into());
        }
        origin
    } else {
        1.0
    };
    let obs = scaled(&smoothed, origin_scale)?;
    let n = obs.len();
    let cutoff_index = match config.cutoff {
        Some(c) => {
            let k = obs.index_of(c).filter(|&k| k > 0).ok_or(SeriesError::CutoffOutOfRange {
                cutoff: c,
                first: obs.start(),
                last: obs.end(),
            })?;
            Some(k)
        }
        None => None,
    };

    let (forecast, provenance) = match baseline {
        BaselineSource::Supplied(expected) => {
            if expected.start() != obs.start() || expected.len() != n {
                return Err(PipelineError::ExpectedMisaligned);
            }
            let p = scaled(&prepare(expected, config.window)?, origin_scale)?;
            let forecast = BaselineForecast::supplied(p.start(), p.values().to_vec())?;
            let provenance = BaselineProvenance {
                source: "supplied".to_string(),
                model: None,
            };
            (forecast, provenance)
        }
        BaselineSource::Fitted { kind, covariates } => {
            let k = cutoff_index.ok_or(PipelineError::CutoffRequired)?;
            let pre = PerformanceSeries::new(obs.start(), obs.values()[..k].to_vec(), &label)?;
            let model = baseline::fit(*kind, &pre, covariates.as_ref())?;
            let forecast = baseline::forecast(&model, covariates.as_ref(), n)?;
            let provenance = BaselineProvenance {
                source: kind.to_string(),
                model: Some(model),
            };
            (forecast, provenance)
        }
    };

    let res = residuals(&obs, &forecast)?;
    let from = cutoff_index.unwrap_or(0);
    let (_, tail_windows) = detect(&res.tail(from), &config.detect_options());
    let windows: Vec<DisruptionWindow> = tail_windows.into_iter().map(|w| w.offset(from)).collect();

    let mut fitted = Vec::new();
    let mut failures = Vec::new();
    for (w, result) in windows.iter().zip(fit_disruptions(&windows, &obs, &forecast, config.fit)) {
        match result {
            Ok(f) => fitted.push(f),
            Err(e) => failures.push(FitFailure {
                window: w.record(obs.start()),
                error: e.to_string(),
            }),
        }
    }
    let profile = DisruptionProfile::new(label.clone(), fitted.clone());
    let indices = compute_indices(
        &obs,
        &forecast,
        &profile,
        config.rho_basis,
        config.resilience_options(),
        config.thresholds,
    )?;

    let report = ResilienceReport {
        schema_version: SCHEMA_VERSION.to_string(),
        label,
        tool_version: TOOL_VERSION.to_string(),
        series: SeriesInfo {
            start: obs.start(),
            end: obs.end(),
            months: n,
        },
        config: config.clone(),
        baseline: provenance,
        origin_scale,
        windows: windows.iter().map(|w| w.record(obs.start())).collect(),
        disruptions: fitted.iter().map(|f| f.record(obs.start())).collect(),
        flags: ReportFlags {
            no_disruptions: windows.is_empty(),
            unrecovered: windows.iter().filter(|w| !w.recovery_observed).count(),
            fit_failures: failures.len(),
        },
        fit_failures: failures,
        indices,
        input_digests,
        metadata: None,
    };
    Ok(Analysis {
        report,
        observed: obs,
        forecast,
        windows,
        fitted,
    })
}
