//! Counterfactual baselines: models fitted on the pre-disruption period and
//! forecast over the whole horizon.
//!
//! Three model families are available:
//!
//! * `covariate`: `P(t) = σ̄ · x(t) · s(m)` with `x(t) = physicians(t) · N`
//!   and `σ̄` fitted by least squares through the origin.
//! * `generalized_logistic`: `A + (K − A) / (1 + Q·e^(−B·t))^(1/ν)` times
//!   the same multiplicative monthly factors.
//! * `exponential_smoothing`: additive Holt-Winters with period 12 and
//!   grid-searched smoothing weights.
//!
//! Multiplicative monthly factors are the per-calendar-month means of the
//! ratio observed / trend, rescaled to average exactly 1.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::betafit::optimize::{minimize, Bounds, MinimizeOptions};
use crate::series::{MonthStamp, PerformanceSeries, SeriesError};

pub const MIN_FIT_MONTHS: usize = 24;
const PERIOD: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("covariates do not cover the fit window {start}..={end}")]
    AlignmentMismatch { start: MonthStamp, end: MonthStamp },
    #[error("covariate product physicians × population is zero everywhere")]
    DegenerateCovariate,
    #[error("series has {len} months, at least {min} are needed")]
    SeriesTooShort { len: usize, min: usize },
    #[error("optimizer found no usable fit (best sse {best_sse}, parameters {parameters:?})")]
    NonConvergence {
        best_sse: f64,
        parameters: BTreeMap<String, f64>,
    },
    #[error("covariate model needs covariates to forecast")]
    CovariateMissing,
    #[error("covariates end at {end}, forecast needs {needed}")]
    CovariateTooShort { end: MonthStamp, needed: MonthStamp },
    #[error("forecast value at month {index} is not positive")]
    NonPositiveForecast { index: usize },
    #[error("model is missing parameter {0:?}")]
    MissingParameter(String),
    #[error("invalid covariate data at row {row}: {reason}")]
    InvalidCovariate { row: usize, reason: String },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Covariate,
    GeneralizedLogistic,
    ExponentialSmoothing,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Covariate => "covariate",
            Self::GeneralizedLogistic => "generalized_logistic",
            Self::ExponentialSmoothing => "exponential_smoothing",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "covariate" => Ok(Self::Covariate),
            "logistic" | "generalized_logistic" => Ok(Self::GeneralizedLogistic),
            "ets" | "exponential_smoothing" => Ok(Self::ExponentialSmoothing),
            other => Err(format!("unknown baseline kind {other:?}")),
        }
    }
}

/// Monthly physician counts and a constant population, the drivers of the
/// covariate baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSeries {
    start: MonthStamp,
    physicians: Vec<f64>,
    population: f64,
    ratio_scale: Option<f64>,
}

impl CovariateSeries {
    pub fn new(
        start: MonthStamp,
        physicians: Vec<f64>,
        population: f64,
    ) -> Result<Self, BaselineError> {
        for (i, &p) in physicians.iter().enumerate() {
            if !(p.is_finite() && p >= 0.0) {
                return Err(BaselineError::InvalidCovariate {
                    row: i + 2,
                    reason: format!("physicians {p} must be finite and non-negative"),
                });
            }
        }
        if !(population.is_finite() && population > 0.0) {
            return Err(BaselineError::InvalidCovariate {
                row: 2,
                reason: format!("population {population} must be positive"),
            });
        }
        Ok(Self {
            start,
            physicians,
            population,
            ratio_scale: None,
        })
    }

    /// Attaches a published visits-per-physician-capita ratio, kept as
    /// provenance next to the fitted scale.
    pub fn with_ratio_scale(mut self, sigma: f64) -> Self {
        self.ratio_scale = Some(sigma);
        self
    }

    pub fn start(&self) -> MonthStamp {
        self.start
    }

    pub fn end(&self) -> MonthStamp {
        self.start.offset(self.physicians.len() as i64 - 1)
    }

    pub fn physicians(&self) -> &[f64] {
        &self.physicians
    }

    pub fn population(&self) -> f64 {
        self.population
    }

    pub fn ratio_scale(&self) -> Option<f64> {
        self.ratio_scale
    }

    /// Emits the `month,physicians,population` CSV read by [`parse_covariates`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from("month,physicians,population\n");
        for (i, p) in self.physicians.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.start.offset(i as i64), p, self.population));
        }
        out
    }

    /// `physicians · population` for `len` months starting at `from`.
    fn products(&self, from: MonthStamp, len: usize) -> Result<Vec<f64>, BaselineError> {
        let offset = self.start.months_until(from);
        let last = from.offset(len as i64 - 1);
        if offset < 0 {
            return Err(BaselineError::AlignmentMismatch {
                start: from,
                end: last,
            });
        }
        let offset = offset as usize;
        if offset + len > self.physicians.len() {
            return Err(BaselineError::CovariateTooShort {
                end: self.end(),
                needed: last,
            });
        }
        Ok(self.physicians[offset..offset + len]
            .iter()
            .map(|p| p * self.population)
            .collect())
    }
}

/// Parses `month,physicians,population` CSV; population must be constant
/// within 1e-9 relative.
pub fn parse_covariates(text: &str) -> Result<CovariateSeries, BaselineError> {
    let mut rows: Vec<(usize, MonthStamp, f64, f64)> = Vec::new();
    let mut header_seen = false;
    for (lineno, raw) in text.lines().enumerate() {
        let row = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = |reason: String| BaselineError::InvalidCovariate { row, reason };
        if !header_seen {
            if fields != ["month", "physicians", "population"] {
                return Err(bad("expected header month,physicians,population".into()));
            }
            header_seen = true;
            continue;
        }
        if fields.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", fields.len())));
        }
        let month: MonthStamp = fields[0]
            .parse()
            .map_err(|_| bad(format!("bad month {:?}", fields[0])))?;
        let phys: f64 = fields[1]
            .parse()
            .map_err(|_| bad(format!("bad physicians {:?}", fields[1])))?;
        let pop: f64 = fields[2]
            .parse()
            .map_err(|_| bad(format!("bad population {:?}", fields[2])))?;
        rows.push((row, month, phys, pop));
    }
    if rows.is_empty() {
        return Err(BaselineError::InvalidCovariate {
            row: 1,
            reason: "no data rows".into(),
        });
    }
    rows.sort_by_key(|r| r.1);
    let start = rows[0].1;
    let population = rows[0].3;
    let mut physicians = Vec::with_capacity(rows.len());
    for (k, &(row, month, phys, pop)) in rows.iter().enumerate() {
        if month != start.offset(k as i64) {
            return Err(BaselineError::InvalidCovariate {
                row,
                reason: format!("month {month} breaks the monthly sequence"),
            });
        }
        if (pop - population).abs() > 1e-9 * population.abs() {
            return Err(BaselineError::InvalidCovariate {
                row,
                reason: format!("population {pop} differs from {population}"),
            });
        }
        physicians.push(phys);
    }
    CovariateSeries::new(start, physicians, population)
}

/// A fitted baseline, serializable as `{kind, parameters, seasonal_factors,
/// fit_window, fit_sse}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    pub parameters: BTreeMap<String, f64>,
    /// Multiplicative factors for January..December, mean 1.
    pub seasonal_factors: Option<Vec<f64>>,
    pub fit_window: (MonthStamp, MonthStamp),
    pub fit_sse: f64,
}

impl BaselineModel {
    fn param(&self, name: &str) -> Result<f64, BaselineError> {
        self.parameters
            .get(name)
            .copied()
            .ok_or_else(|| BaselineError::MissingParameter(name.to_string()))
    }

    pub fn fit_len(&self) -> usize {
        (self.fit_window.0.months_until(self.fit_window.1) + 1) as usize
    }

    fn seasonal(&self, month: MonthStamp) -> f64 {
        self.seasonal_factors
            .as_ref()
            .map_or(1.0, |s| s[month.month0()])
    }
}

/// Expected performance `P(t)` over the analysis horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineForecast {
    start: MonthStamp,
    values: Vec<f64>,
    /// `None` when the baseline was supplied directly rather than fitted.
    model: Option<BaselineModel>,
}

impl BaselineForecast {
    /// Wraps an externally supplied expected-performance series.
    pub fn supplied(start: MonthStamp, values: Vec<f64>) -> Result<Self, BaselineError> {
        if let Some(index) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(BaselineError::NonPositiveForecast { index });
        }
        Ok(Self {
            start,
            values,
            model: None,
        })
    }

    pub fn start(&self) -> MonthStamp {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn model(&self) -> Option<&BaselineModel> {
        self.model.as_ref()
    }

    /// Multiplies every value by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            start: self.start,
            values: self.values.iter().map(|v| v * factor).collect(),
            model: self.model.clone(),
        }
    }

    /// The forecast restricted to `len` months starting at `from`.
    pub fn window(&self, from: MonthStamp, len: usize) -> Option<Self> {
        let k = self.start.months_until(from);
        if k < 0 || k as usize + len > self.values.len() {
            return None;
        }
        let k = k as usize;
        Some(Self {
            start: from,
            values: self.values[k..k + len].to_vec(),
            model: self.model.clone(),
        })
    }
}

fn require_length(pre: &PerformanceSeries) -> Result<(), BaselineError> {
    if pre.len() < MIN_FIT_MONTHS {
        return Err(BaselineError::SeriesTooShort {
            len: pre.len(),
            min: MIN_FIT_MONTHS,
        });
    }
    Ok(())
}

/// Per-calendar-month mean of `observed / trend`, rescaled to mean 1.
fn monthly_factors(start: MonthStamp, observed: &[f64], trend: &[f64]) -> Vec<f64> {
    let mut sums = [0.0; PERIOD];
    let mut counts = [0usize; PERIOD];
    for (i, (o, t)) in observed.iter().zip(trend).enumerate() {
        if *t > 0.0 {
            let m = start.offset(i as i64).month0();
            sums[m] += o / t;
            counts[m] += 1;
        }
    }
    let raw: Vec<f64> = (0..PERIOD)
        .map(|m| if counts[m] > 0 { sums[m] / counts[m] as f64 } else { 1.0 })
        .collect();
    let c = raw.iter().sum::<f64>() / PERIOD as f64;
    if !(c > 0.0) {
        return vec![1.0; PERIOD];
    }
    raw.iter().map(|s| s / c).collect()
}

fn with_fit_sse(
    mut model: BaselineModel,
    pre: &PerformanceSeries,
    cov: Option<&CovariateSeries>,
) -> Result<BaselineModel, BaselineError> {
    let fc = forecast(&model, cov, pre.len())?;
    model.fit_sse = sse(pre.values(), fc.values());
    Ok(model)
}

fn sse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

pub fn fit_covariate(
    pre: &PerformanceSeries,
    cov: &CovariateSeries,
) -> Result<BaselineModel, BaselineError> {
    require_length(pre)?;
    let x = cov
        .products(pre.start(), pre.len())
        .map_err(|_| BaselineError::AlignmentMismatch {
            start: pre.start(),
            end: pre.end(),
        })?;
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    if sxx == 0.0 {
        return Err(BaselineError::DegenerateCovariate);
    }
    let sox: f64 = pre.values().iter().zip(&x).map(|(o, x)| o * x).sum();
    let sigma = sox / sxx;
    let trend: Vec<f64> = x.iter().map(|x| sigma * x).collect();

    let mut parameters = BTreeMap::new();
    parameters.insert("sigma".to_string(), sigma);
    if let Some(seed) = cov.ratio_scale() {
        parameters.insert("sigma_seed".to_string(), seed);
    }
    let model = BaselineModel {
        kind: BaselineKind::Covariate,
        parameters,
        seasonal_factors: Some(monthly_factors(pre.start(), pre.values(), &trend)),
        fit_window: (pre.start(), pre.end()),
        fit_sse: 0.0,
    };
    with_fit_sse(model, pre, Some(cov))
}

/// Logistic shape `(1 + Q·e^(−B·t))^(−1/ν)`.
fn logistic_shape(t: f64, q: f64, b: f64, nu: f64) -> f64 {
    (-(q * (-b * t).exp()).ln_1p() / nu).exp()
}

/// Best `(A, K − A)` for a fixed shape under `A ≥ 0`, `K ≥ A`.
fn logistic_levels(y: &[f64], g: &[f64]) -> (f64, f64, f64) {
    let n = y.len() as f64;
    let cost = |a: f64, d: f64| -> f64 {
        y.iter()
            .zip(g)
            .map(|(y, g)| (y - a - d * g).powi(2))
            .sum()
    };
    let ybar = y.iter().sum::<f64>() / n;
    let gbar = g.iter().sum::<f64>() / n;
    let sgg: f64 = g.iter().map(|g| (g - gbar).powi(2)).sum();
    let sgy: f64 = g.iter().zip(y).map(|(g, y)| (g - gbar) * (y - ybar)).sum();
    let g2: f64 = g.iter().map(|g| g * g).sum();
    let gy: f64 = g.iter().zip(y).map(|(g, y)| g * y).sum();

    let mut candidates = vec![(ybar.max(0.0), 0.0)];
    if sgg > 0.0 {
        let d = sgy / sgg;
        candidates.push((ybar - d * gbar, d));
    }
    if g2 > 0.0 {
        candidates.push((0.0, gy / g2));
    }
    candidates
        .into_iter()
        .filter(|&(a, d)| a >= 0.0 && d >= 0.0)
        .map(|(a, d)| (a, d, cost(a, d)))
        .min_by(|x, y| x.2.total_cmp(&y.2))
        .unwrap_or((0.0, 0.0, cost(0.0, 0.0)))
}

/// Least-squares logistic trend `(Q, B, ν, A, K − A)` for `y`; `extra` is
/// tried as an additional start.
fn logistic_trend(y: &[f64], extra: Option<&[f64]>) -> Result<([f64; 3], f64, f64), BaselineError> {
    let profile = |x: &[f64]| -> (f64, f64, f64) {
        let g: Vec<f64> = (0..y.len())
            .map(|t| logistic_shape(t as f64, x[0], x[1], x[2]))
            .collect();
        logistic_levels(y, &g)
    };

    // Q, B, ν are searched; A and K − A are solved exactly for each shape.
    let bounds = Bounds::new(vec![1e-8, 1e-6, 1e-3], vec![1e8, 10.0, 1e3])
        .expect("static bounds are valid");
    let mut starts = Vec::new();
    for q in [1.0, 10.0] {
        for b in [0.02, 0.1, 0.3] {
            starts.push(vec![q, b, 1.0]);
        }
    }
    if let Some(x) = extra {
        starts.push(x.to_vec());
    }
    let best = minimize(|x| profile(x).2, &bounds, &starts, MinimizeOptions::default())
        .map_err(|_| BaselineError::NonConvergence {
            best_sse: f64::INFINITY,
            parameters: BTreeMap::new(),
        })?;
    let (a, d, _) = profile(&best.params);
    Ok(([best.params[0], best.params[1], best.params[2]], a, d))
}

const LOGISTIC_ROUNDS: usize = 10;

pub fn fit_generalized_logistic(pre: &PerformanceSeries) -> Result<BaselineModel, BaselineError> {
    require_length(pre)?;
    let y = pre.values();
    let month = |t: usize| pre.start().offset(t as i64).month0();

    // Alternate: trend on the deseasonalized series, then factors from the
    // ratios to that trend. Fitting the trend to raw values lets it chase
    // the seasonal swing at the end of the window.
    let mut factors = vec![1.0; PERIOD];
    let mut shape: Option<[f64; 3]> = None;
    let mut best: Option<BaselineModel> = None;
    for _ in 0..LOGISTIC_ROUNDS {
        let adjusted: Vec<f64> = y.iter().enumerate().map(|(t, v)| v / factors[month(t)]).collect();
        let (x, a, d) = logistic_trend(&adjusted, shape.as_ref().map(|s| &s[..]))?;
        let [q, b, nu] = x;
        let mut parameters = BTreeMap::new();
        parameters.insert("A".to_string(), a);
        parameters.insert("K".to_string(), a + d);
        parameters.insert("Q".to_string(), q);
        parameters.insert("B".to_string(), b);
        parameters.insert("nu".to_string(), nu);
        if !parameters.values().all(|v| v.is_finite()) {
            return Err(BaselineError::NonConvergence {
                best_sse: f64::INFINITY,
                parameters,
            });
        }
        let trend: Vec<f64> = (0..y.len())
            .map(|t| a + d * logistic_shape(t as f64, q, b, nu))
            .collect();
        let next = monthly_factors(pre.start(), y, &trend);
        let change = next
            .iter()
            .zip(&factors)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max);
        let model = with_fit_sse(
            BaselineModel {
                kind: BaselineKind::GeneralizedLogistic,
                parameters,
                seasonal_factors: Some(next.clone()),
                fit_window: (pre.start(), pre.end()),
                fit_sse: 0.0,
            },
            pre,
            None,
        )?;
        if best.as_ref().is_none_or(|m| model.fit_sse < m.fit_sse) {
            best = Some(model);
        }
        factors = next;
        shape = Some(x);
        if change < 1e-6 {
            break;
        }
    }
    Ok(best.expect("at least one round"))
}

const ETS_GRID: [f64; 19] = [
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75,
    0.80, 0.85, 0.90, 0.95,
];

struct HoltWinters {
    level: f64,
    trend: f64,
    /// Seasonal components indexed by `t mod 12`, `t` counted from the fit start.
    season: [f64; PERIOD],
    /// One-step predictions; the first season reproduces the data.
    fitted: Vec<f64>,
    sse: f64,
}

fn holt_winters(y: &[f64], alpha: f64, beta: f64, gamma: f64) -> HoltWinters {
    let mean1 = y[..PERIOD].iter().sum::<f64>() / PERIOD as f64;
    let mean2 = y[PERIOD..2 * PERIOD].iter().sum::<f64>() / PERIOD as f64;
    let mut trend = (mean2 - mean1) / PERIOD as f64;
    let mid = (PERIOD as f64 - 1.0) / 2.0;
    let mut season = [0.0; PERIOD];
    for (j, s) in season.iter_mut().enumerate() {
        *s = y[j] - (mean1 + trend * (j as f64 - mid));
    }
    // level at the last month of the first season
    let mut level = mean1 + trend * mid;
    let mut fitted = y[..PERIOD].to_vec();
    let mut sse = 0.0;
    for (t, &obs) in y.iter().enumerate().skip(PERIOD) {
        let k = t % PERIOD;
        let pred = level + trend + season[k];
        fitted.push(pred);
        sse += (obs - pred).powi(2);
        let prev_level = level;
        level = alpha * (obs - season[k]) + (1.0 - alpha) * (level + trend);
        trend = beta * (level - prev_level) + (1.0 - beta) * trend;
        season[k] = gamma * (obs - level) + (1.0 - gamma) * season[k];
    }
    HoltWinters {
        level,
        trend,
        season,
        fitted,
        sse,
    }
}

pub fn fit_exponential_smoothing(pre: &PerformanceSeries) -> Result<BaselineModel, BaselineError> {
    require_length(pre)?;
    let y = pre.values();
    let mut best: Option<(f64, [f64; 3])> = None;
    for &a in &ETS_GRID {
        for &b in &ETS_GRID {
            for &g in &ETS_GRID {
                let run = holt_winters(y, a, b, g);
                if run.sse.is_finite() && best.is_none_or(|(s, _)| run.sse < s) {
                    best = Some((run.sse, [a, b, g]));
                }
            }
        }
    }
    let (_, [a, b, g]) = best.ok_or(BaselineError::NonConvergence {
        best_sse: f64::INFINITY,
        parameters: BTreeMap::new(),
    })?;
    let run = holt_winters(y, a, b, g);

    let mut parameters = BTreeMap::new();
    parameters.insert("alpha".to_string(), a);
    parameters.insert("beta".to_string(), b);
    parameters.insert("gamma".to_string(), g);
    parameters.insert("level".to_string(), run.level);
    parameters.insert("trend".to_string(), run.trend);
    parameters.insert(
        "floor".to_string(),
        1e-6 * y.iter().map(|v| v.abs()).sum::<f64>() / y.len() as f64,
    );
    for (k, s) in run.season.iter().enumerate() {
        parameters.insert(format!("season.{k:02}"), *s);
    }
    for (t, f) in run.fitted.iter().enumerate() {
        parameters.insert(format!("fitted.{t:04}"), *f);
    }
    let model = BaselineModel {
        kind: BaselineKind::ExponentialSmoothing,
        parameters,
        seasonal_factors: None,
        fit_window: (pre.start(), pre.end()),
        fit_sse: 0.0,
    };
    with_fit_sse(model, pre, None)
}

/// Fits the requested model family.
pub fn fit(
    kind: BaselineKind,
    pre: &PerformanceSeries,
    cov: Option<&CovariateSeries>,
) -> Result<BaselineModel, BaselineError> {
    match kind {
        BaselineKind::Covariate => fit_covariate(pre, cov.ok_or(BaselineError::CovariateMissing)?),
        BaselineKind::GeneralizedLogistic => fit_generalized_logistic(pre),
        BaselineKind::ExponentialSmoothing => fit_exponential_smoothing(pre),
    }
}

/// Predicts `horizon` months starting at the model's fit-window start.
pub fn forecast(
    model: &BaselineModel,
    cov: Option<&CovariateSeries>,
    horizon: usize,
) -> Result<BaselineForecast, BaselineError> {
    let start = model.fit_window.0;
    let values: Vec<f64> = match model.kind {
        BaselineKind::Covariate => {
            let cov = cov.ok_or(BaselineError::CovariateMissing)?;
            let sigma = model.param("sigma")?;
            cov.products(start, horizon)?
                .iter()
                .enumerate()
                .map(|(i, x)| sigma * x * model.seasonal(start.offset(i as i64)))
                .collect()
        }
        BaselineKind::GeneralizedLogistic => {
            let a = model.param("A")?;
            let k = model.param("K")?;
            let q = model.param("Q")?;
            let b = model.param("B")?;
            let nu = model.param("nu")?;
            (0..horizon)
                .map(|i| {
                    let trend = a + (k - a) * logistic_shape(i as f64, q, b, nu);
                    trend * model.seasonal(start.offset(i as i64))
                })
                .collect()
        }
        BaselineKind::ExponentialSmoothing => {
            let fit_len = model.fit_len();
            let level = model.param("level")?;
            let trend = model.param("trend")?;
            let floor = model.param("floor")?;
            let mut season = [0.0; PERIOD];
            for (k, s) in season.iter_mut().enumerate() {
                *s = model.param(&format!("season.{k:02}"))?;
            }
            (0..horizon)
                .map(|t| {
                    let v = if t < fit_len {
                        model.param(&format!("fitted.{t:04}"))?
                    } else {
                        let h = (t + 1 - fit_len) as f64;
                        level + h * trend + season[t % PERIOD]
                    };
                    Ok(v.max(floor))
                })
                .collect::<Result<_, BaselineError>>()?
        }
    };
    if let Some(index) = values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(BaselineError::NonPositiveForecast { index });
    }
    Ok(BaselineForecast {
        start,
        values,
        model: Some(model.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn start() -> MonthStamp {
        MonthStamp::new(2017, 1).unwrap()
    }

    fn series(values: Vec<f64>) -> PerformanceSeries {
        PerformanceSeries::new(start(), values, "t").unwrap()
    }

    fn cov_from(x: &[f64]) -> CovariateSeries {
        CovariateSeries::new(start(), x.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn exact_proportionality() {
        let x: Vec<f64> = (0..30).map(|t| 10.0 + t as f64).collect();
        let pre = series(x.iter().map(|v| 2.0 * v).collect());
        let m = fit_covariate(&pre, &cov_from(&x)).unwrap();
        assert!((m.parameters["sigma"] - 2.0).abs() < 1e-12);
        for s in m.seasonal_factors.as_ref().unwrap() {
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(m.fit_sse < 1e-20);
    }

    #[test]
    fn december_bump_factors() {
        // x ≡ 1, O = 1.1 in December else 1, two years:
        // σ̄ = 24.2 / 24 = 121/120; ratios 12/11 (Dec) and 120/121 (others);
        // their mean is exactly 1 so the renormalizer is 1.
        let x = vec![1.0; 24];
        let o: Vec<f64> = (0..24).map(|t| if t % 12 == 11 { 1.1 } else { 1.0 }).collect();
        let m = fit_covariate(&series(o), &cov_from(&x)).unwrap();
        assert!((m.parameters["sigma"] - 121.0 / 120.0).abs() < 1e-12);
        let s = m.seasonal_factors.as_ref().unwrap();
        assert!((s[11] - 12.0 / 11.0).abs() < 1e-12);
        for f in &s[..11] {
            assert!((f - 120.0 / 121.0).abs() < 1e-12);
        }
        assert!(m.fit_sse < 1e-20);
    }

    #[test]
    fn covariate_errors() {
        let pre = series(vec![1.0; 24]);
        assert_eq!(
            fit_covariate(&pre, &cov_from(&[0.0; 24])),
            Err(BaselineError::DegenerateCovariate)
        );
        assert!(matches!(
            fit_covariate(&pre, &cov_from(&[1.0; 12])),
            Err(BaselineError::AlignmentMismatch { .. })
        ));
        let late = CovariateSeries::new(start().offset(1), vec![1.0; 40], 1.0).unwrap();
        assert!(matches!(
            fit_covariate(&pre, &late),
            Err(BaselineError::AlignmentMismatch { .. })
        ));
        assert!(matches!(
            fit_covariate(&series(vec![1.0; 12]), &cov_from(&[1.0; 12])),
            Err(BaselineError::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn covariate_forecast_substitution() {
        let model = BaselineModel {
            kind: BaselineKind::Covariate,
            parameters: [("sigma".to_string(), 2.0)].into_iter().collect(),
            seasonal_factors: Some(vec![1.0; 12]),
            fit_window: (start(), start().offset(2)),
            fit_sse: 0.0,
        };
        let fc = forecast(&model, Some(&cov_from(&[1.0, 2.0, 3.0])), 3).unwrap();
        assert_eq!(fc.values(), &[2.0, 4.0, 6.0]);
        assert_eq!(forecast(&model, None, 3), Err(BaselineError::CovariateMissing));
        assert!(matches!(
            forecast(&model, Some(&cov_from(&[1.0, 2.0, 3.0])), 4),
            Err(BaselineError::CovariateTooShort { .. })
        ));
    }

    #[test]
    fn parses_covariate_csv() {
        let cov = parse_covariates("month,physicians,population\n2017-01,10,500\n2017-02,11,500\n")
            .unwrap();
        assert_eq!(cov.physicians(), &[10.0, 11.0]);
        assert_eq!(cov.population(), 500.0);
        let err = parse_covariates("month,physicians,population\n2017-01,10,500\n2017-02,11,501\n");
        assert!(matches!(err, Err(BaselineError::InvalidCovariate { row: 3, .. })));
    }

    fn logistic(t: f64) -> f64 {
        2.0 / (1.0 + (-0.2 * t).exp())
    }

    #[test]
    fn logistic_recovers_noise_free_curve() {
        let y: Vec<f64> = (0..36).map(|t| logistic(t as f64)).collect();
        let pre = series(y.clone());
        let m = fit_generalized_logistic(&pre).unwrap();
        let total: f64 = y.iter().map(|v| v * v).sum();
        assert!(m.fit_sse / total <= 1e-6, "rel sse {}", m.fit_sse / total);
        // continues toward K = 2 without overshoot
        let fc = forecast(&m, None, 60).unwrap();
        let tail = &fc.values()[36..];
        for w in tail.windows(2) {
            assert!(w[1] >= w[0] - 1e-3, "{:?}", w);
        }
        assert!((tail.last().unwrap() - 2.0).abs() < 0.02);
        for (t, v) in tail.iter().enumerate() {
            assert!((v - logistic((t + 36) as f64)).abs() < 0.02);
        }
    }

    #[test]
    fn logistic_with_seasonality_keeps_the_trend() {
        // mid-growth logistic under a ±5% seasonal swing, no noise
        let trend = |t: f64| 50.0 + 100.0 / (1.0 + 4.0 * (-0.05 * t).exp());
        let season = |t: f64| 1.0 + 0.05 * (2.0 * std::f64::consts::PI * t / 12.0).sin();
        let pre = series((0..36).map(|t| trend(t as f64) * season(t as f64)).collect());
        let m = fit_generalized_logistic(&pre).unwrap();
        let fc = forecast(&m, None, 60).unwrap();
        for t in 36..60 {
            let want = trend(t as f64) * season(t as f64);
            assert!((fc.values()[t] - want).abs() / want < 0.03, "t {t}: {} vs {want}", fc.values()[t]);
        }
    }

    #[test]
    fn logistic_on_constant_series() {
        let pre = series(vec![3.5; 30]);
        let m = fit_generalized_logistic(&pre).unwrap();
        let fc = forecast(&m, None, 48).unwrap();
        for v in fc.values() {
            assert!((v - 3.5).abs() < 1e-6, "{v}");
        }
    }

    #[test]
    fn logistic_on_ramp_is_monotone() {
        let pre = series((0..36).map(|t| 10.0 + t as f64).collect());
        let m = fit_generalized_logistic(&pre).unwrap();
        let fc = forecast(&m, None, 36).unwrap();
        for w in fc.values().windows(2) {
            assert!(w[1] >= w[0], "{:?}", w);
        }
    }

    #[test]
    fn ets_continues_ramp() {
        let pre = series((0..36).map(|t| 10.0 + 0.5 * t as f64).collect());
        let m = fit_exponential_smoothing(&pre).unwrap();
        let fc = forecast(&m, None, 48).unwrap();
        let want = 10.0 + 0.5 * 47.0;
        assert!((fc.values()[47] - want).abs() / want < 0.02, "{}", fc.values()[47]);
        assert!(m.seasonal_factors.is_none());
    }

    #[test]
    fn ets_keeps_seasonal_phase() {
        use std::f64::consts::PI;
        let y: Vec<f64> = (0..36)
            .map(|t| 100.0 + 10.0 * (2.0 * PI * t as f64 / 12.0).sin())
            .collect();
        let m = fit_exponential_smoothing(&series(y.clone())).unwrap();
        let fc = forecast(&m, None, 60).unwrap();
        for t in 36..60 {
            let dev = fc.values()[t] - 100.0;
            let prev = fc.values()[t - 12] - 100.0;
            if prev.abs() > 1.0 {
                assert_eq!(dev.signum(), prev.signum(), "t={t}");
            }
        }
    }

    #[test]
    fn ets_needs_two_seasons() {
        assert!(matches!(
            fit_exponential_smoothing(&series(vec![1.0; 12])),
            Err(BaselineError::SeriesTooShort { len: 12, min: 24 })
        ));
    }

    #[test]
    fn model_json_round_trip() {
        let pre = series((0..30).map(|t| 5.0 + (t % 12) as f64).collect());
        let m = fit_exponential_smoothing(&pre).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        let back: BaselineModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["kind", "parameters", "seasonal_factors", "fit_window", "fit_sse"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    fn noisy(seed: u64, len: usize) -> Vec<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|t| (50.0 + t as f64) * (1.0 + 0.1 * (t % 12) as f64 / 12.0) * rng.random_range(0.9..1.1))
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn in_sample_sse_matches_and_factors_average_one(seed in 0u64..1000, len in 24usize..48) {
            let y = noisy(seed, len);
            let pre = series(y.clone());
            let x: Vec<f64> = (0..len).map(|t| 50.0 + t as f64).collect();
            let cov = cov_from(&x);
            for kind in [BaselineKind::Covariate, BaselineKind::GeneralizedLogistic, BaselineKind::ExponentialSmoothing] {
                let m = fit(kind, &pre, Some(&cov)).unwrap();
                let fc = forecast(&m, Some(&cov), len).unwrap();
                prop_assert!((sse(&y, fc.values()) - m.fit_sse).abs() <= 1e-9 * m.fit_sse.max(1.0));
                prop_assert!(fc.values().iter().all(|v| *v > 0.0));
                if let Some(s) = &m.seasonal_factors {
                    let mean = s.iter().sum::<f64>() / 12.0;
                    prop_assert!((mean - 1.0).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn covariate_scale_consistency(seed in 0u64..1000, c in 0.01f64..100.0) {
            let y = noisy(seed, 30);
            let x: Vec<f64> = (0..30).map(|t| 50.0 + t as f64).collect();
            let cov = cov_from(&x);
            let m1 = fit_covariate(&series(y.clone()), &cov).unwrap();
            let m2 = fit_covariate(&series(y.iter().map(|v| v * c).collect()), &cov).unwrap();
            prop_assert!((m2.parameters["sigma"] / m1.parameters["sigma"] - c).abs() < 1e-9 * c);
            let f1 = forecast(&m1, Some(&cov), 30).unwrap();
            let f2 = forecast(&m2, Some(&cov), 30).unwrap();
            for (a, b) in f1.values().iter().zip(f2.values()) {
                prop_assert!((b / a - c).abs() < 1e-9 * c);
            }
        }
    }

    #[test]
    fn seasonality_never_hurts_on_seasonality_free_data() {
        let x: Vec<f64> = (0..36).map(|t| 20.0 + 0.3 * t as f64).collect();
        let pre = series(x.iter().map(|v| 1.7 * v).collect());
        let cov = cov_from(&x);
        let m = fit_covariate(&pre, &cov).unwrap();
        let mut flat = m.clone();
        flat.seasonal_factors = Some(vec![1.0; 12]);
        let sse_flat = sse(pre.values(), forecast(&flat, Some(&cov), 36).unwrap().values());
        assert!(sse_flat <= m.fit_sse + 1e-12);
    }
}
