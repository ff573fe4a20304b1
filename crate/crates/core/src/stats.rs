//! Group means with normal-approximation 95% intervals, and Pearson
//! correlation with two-sided t-test p-values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{student_t_two_sided, NumericalNonConvergence};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("no values")]
    EmptyInput,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("a variable has zero variance")]
    ZeroVariance,
    #[error("need at least 3 paired observations, got {0}")]
    TooFewPoints(usize),
    #[error(transparent)]
    NumericalNonConvergence(#[from] NumericalNonConvergence),
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("no unit appears in both tables")]
    NoOverlap,
}

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub count: usize,
}

/// Mean ± 1.96·s/√M with the sample standard deviation `s`.
pub fn group_mean_ci(label: impl Into<String>, values: &[f64]) -> Result<GroupSummary, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let half = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        Z_95 * var.sqrt() / m.sqrt()
    } else {
        0.0
    };
    Ok(GroupSummary {
        label: label.into(),
        mean,
        ci_low: mean - half,
        ci_high: mean + half,
        count: values.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub coefficient: f64,
    pub p_value: f64,
    pub count: usize,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFewPoints(n));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let coefficient = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = nf - 2.0;
    let p_value = if coefficient.abs() == 1.0 {
        0.0
    } else {
        let t = coefficient * (df / (1.0 - coefficient * coefficient)).sqrt();
        student_t_two_sided(t, df)?
    };
    Ok(CorrelationResult {
        coefficient,
        p_value,
        count: n,
    })
}

/// Numeric columns keyed by a `unit` column.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UnitTable {
    pub columns: Vec<String>,
    pub rows: BTreeMap<String, Vec<Option<f64>>>,
}

impl UnitTable {
    /// Parses CSV whose first column is `unit`; empty cells are missing.
    pub fn parse(text: &str) -> Result<Self, StatsError> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| StatsError::MalformedRow {
            row: 1,
            reason: e.to_string(),
        })?;
        if headers.get(0) != Some("unit") || headers.len() < 2 {
            return Err(StatsError::MalformedRow {
                row: 1,
                reason: "expected header unit,<column>...".into(),
            });
        }
        let columns: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut rows = BTreeMap::new();
        for (i, record) in reader.records().enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| StatsError::MalformedRow {
                row,
                reason: e.to_string(),
            })?;
            let unit = record.get(0).unwrap_or_default().to_string();
            let values = record
                .iter()
                .skip(1)
                .map(|cell| {
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>().map(Some).map_err(|_| StatsError::MalformedRow {
                            row,
                            reason: format!("bad number {cell:?}"),
                        })
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            if rows.insert(unit.clone(), values).is_some() {
                return Err(StatsError::MalformedRow {
                    row,
                    reason: format!("duplicate unit {unit:?}"),
                });
            }
        }
        Ok(Self { columns, rows })
    }

    /// Splits `unit,index_value,covariate_value` rows into an index table
    /// and a covariate table.
    pub fn split_pairs(text: &str) -> Result<(Self, Self), StatsError> {
        let joined = Self::parse(text)?;
        if joined.columns != ["index_value", "covariate_value"] {
            return Err(StatsError::MalformedRow {
                row: 1,
                reason: "expected header unit,index_value,covariate_value".into(),
            });
        }
        let pick = |k: usize, name: &str| Self {
            columns: vec![name.to_string()],
            rows: joined
                .rows
                .iter()
                .map(|(u, v)| (u.clone(), vec![v[k]]))
                .collect(),
        };
        Ok((pick(0, "index_value"), pick(1, "covariate_value")))
    }
}

/// One cell of a correlation table; `coefficient`/`p` are absent when the
/// pair could not be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub coefficient: Option<f64>,
    pub p: Option<f64>,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Rows are index columns, columns are covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub cells: BTreeMap<String, BTreeMap<String, CorrelationCell>>,
    pub joined_units: usize,
    pub dropped_units: usize,
}

/// Correlates every index column with every covariate column over the units
/// present in both tables.
pub fn correlation_table(indices: &UnitTable, covariates: &UnitTable) -> Result<CorrelationTable, StatsError> {
    let joined: Vec<&String> = indices
        .rows
        .keys()
        .filter(|u| covariates.rows.contains_key(*u))
        .collect();
    if joined.is_empty() {
        return Err(StatsError::NoOverlap);
    }
    let all_units: std::collections::BTreeSet<&String> =
        indices.rows.keys().chain(covariates.rows.keys()).collect();
    let mut cells = BTreeMap::new();
    for (i, row) in indices.columns.iter().enumerate() {
        let mut line = BTreeMap::new();
        for (j, col) in covariates.columns.iter().enumerate() {
            let (xs, ys): (Vec<f64>, Vec<f64>) = joined
                .iter()
                .filter_map(|u| Some((indices.rows[*u][i]?, covariates.rows[*u][j]?)))
                .unzip();
            let cell = match pearson(&xs, &ys) {
                Ok(c) => CorrelationCell {
                    coefficient: Some(c.coefficient),
                    p: Some(c.p_value),
                    n: c.count,
                    error: None,
                },
                Err(e) => CorrelationCell {
                    coefficient: None,
                    p: None,
                    n: xs.len(),
                    error: Some(e.to_string()),
                },
            };
            line.insert(col.clone(), cell);
        }
        cells.insert(row.clone(), line);
    }
    Ok(CorrelationTable {
        rows: indices.columns.clone(),
        columns: covariates.columns.clone(),
        cells,
        joined_units: joined.len(),
        dropped_units: all_units.len() - joined.len(),
    })
}
