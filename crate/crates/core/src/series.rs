//! Monthly performance series: CSV ingestion, smoothing, normalization and
//! splitting around a cutoff month.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("row {row}: month {month} is missing from the sequence")]
    MissingMonth { row: usize, month: MonthStamp },
    #[error("row {row}: month {month} appears more than once")]
    DuplicateMonth { row: usize, month: MonthStamp },
    #[error("row {row}: negative value {value}")]
    NegativeValue { row: usize, value: f64 },
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("series has no rows")]
    Empty,
    #[error("moving-average window {window} is not in 1..={len}")]
    WindowTooLarge { window: usize, len: usize },
    #[error("first value is zero, cannot normalize")]
    ZeroOrigin,
    #[error("cutoff {cutoff} is not strictly inside {first}..={last}")]
    CutoffOutOfRange {
        cutoff: MonthStamp,
        first: MonthStamp,
        last: MonthStamp,
    },
    #[error("invalid month stamp {0:?}, expected YYYY-MM")]
    InvalidMonth(String),
}

/// A calendar month. Orders as `(year, month)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MonthStamp {
    year: i32,
    month: u8,
}

impl MonthStamp {
    pub fn new(year: i32, month: u8) -> Result<Self, SeriesError> {
        if !(1..=12).contains(&month) {
            return Err(SeriesError::InvalidMonth(format!("{year}-{month}")));
        }
        Ok(Self { year, month })
    }

    pub fn year(self) -> i32 {
        self.year
    }

    /// Calendar month, 1 through 12.
    pub fn month(self) -> u8 {
        self.month
    }

    /// Zero-based calendar month, 0 = January.
    pub fn month0(self) -> usize {
        usize::from(self.month - 1)
    }

    fn ordinal(self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month - 1)
    }

    fn from_ordinal(ord: i64) -> Self {
        Self {
            year: ord.div_euclid(12) as i32,
            month: (ord.rem_euclid(12) + 1) as u8,
        }
    }

    /// The stamp `months` months later (or earlier when negative).
    pub fn offset(self, months: i64) -> Self {
        Self::from_ordinal(self.ordinal() + months)
    }

    /// Signed number of months from `self` to `other`.
    pub fn months_until(self, other: MonthStamp) -> i64 {
        other.ordinal() - self.ordinal()
    }
}

impl fmt::Display for MonthStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for MonthStamp {
    type Err = SeriesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SeriesError::InvalidMonth(s.to_string());
        let (y, m) = s.trim().split_once('-').ok_or_else(bad)?;
        if y.len() != 4 || m.len() != 2 {
            return Err(bad());
        }
        let year: i32 = y.parse().map_err(|_| bad())?;
        let month: u8 = m.parse().map_err(|_| bad())?;
        MonthStamp::new(year, month).map_err(|_| bad())
    }
}

impl Serialize for MonthStamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MonthStamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Gap-free monthly observations starting at `start`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceSeries {
    start: MonthStamp,
    values: Vec<f64>,
    label: String,
}

impl PerformanceSeries {
    pub fn new(
        start: MonthStamp,
        values: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self, SeriesError> {
        if values.is_empty() {
            return Err(SeriesError::Empty);
        }
        for (i, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(SeriesError::MalformedRow {
                    row: i + 2,
                    reason: format!("non-finite value {value}"),
                });
            }
            if value < 0.0 {
                return Err(SeriesError::NegativeValue { row: i + 2, value });
            }
        }
        Ok(Self {
            start,
            values,
            label: label.into(),
        })
    }

    pub fn start(&self) -> MonthStamp {
        self.start
    }

    pub fn end(&self) -> MonthStamp {
        self.start.offset(self.values.len() as i64 - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn month_at(&self, index: usize) -> MonthStamp {
        self.start.offset(index as i64)
    }

    /// Index of `month` in this series, if covered.
    pub fn index_of(&self, month: MonthStamp) -> Option<usize> {
        let k = self.start.months_until(month);
        (k >= 0 && (k as usize) < self.values.len()).then_some(k as usize)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            start: self.start,
            values,
            label: self.label.clone(),
        }
    }

    /// Emits the `month,value,label` CSV form read by [`parse_series`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from("month,value,label\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{},{}\n", self.month_at(i), v, self.label));
        }
        out
    }
}

/// Parses `month,value[,label]` CSV. Lines starting with `#` are skipped.
///
/// Row numbers in errors are 1-based physical lines, the header being row 1.
pub fn parse_series(text: &str) -> Result<PerformanceSeries, SeriesError> {
    let mut rows: Vec<(usize, MonthStamp, f64)> = Vec::new();
    let mut label = String::new();
    let mut header_seen = false;

    for (lineno, raw) in text.lines().enumerate() {
        let row = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !header_seen {
            if fields.len() < 2 || fields[0] != "month" || fields[1] != "value" {
                return Err(SeriesError::MalformedRow {
                    row,
                    reason: "expected header month,value[,label]".into(),
                });
            }
            header_seen = true;
            continue;
        }
        if fields.len() < 2 || fields.len() > 3 {
            return Err(SeriesError::MalformedRow {
                row,
                reason: format!("expected 2 or 3 fields, found {}", fields.len()),
            });
        }
        let month: MonthStamp = fields[0].parse().map_err(|_| SeriesError::MalformedRow {
            row,
            reason: format!("bad month {:?}", fields[0]),
        })?;
        let value: f64 = fields[1].parse().map_err(|_| SeriesError::MalformedRow {
            row,
            reason: format!("bad value {:?}", fields[1]),
        })?;
        if !value.is_finite() {
            return Err(SeriesError::MalformedRow {
                row,
                reason: format!("non-finite value {value}"),
            });
        }
        if value < 0.0 {
            return Err(SeriesError::NegativeValue { row, value });
        }
        if label.is_empty() {
            if let Some(l) = fields.get(2) {
                label = (*l).to_string();
            }
        }
        rows.push((row, month, value));
    }

    if rows.is_empty() {
        return Err(SeriesError::Empty);
    }
    rows.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));

    let start = rows[0].1;
    let mut values = Vec::with_capacity(rows.len());
    for (k, &(row, month, value)) in rows.iter().enumerate() {
        let expected = start.offset(k as i64);
        match month.cmp(&expected) {
            Ordering::Equal => values.push(value),
            Ordering::Less => return Err(SeriesError::DuplicateMonth { row, month }),
            Ordering::Greater => {
                return Err(SeriesError::MissingMonth {
                    row,
                    month: expected,
                })
            }
        }
    }
    PerformanceSeries::new(start, values, label)
}

/// Trailing moving average, shortened at the left edge.
pub fn moving_average(
    series: &PerformanceSeries,
    window: usize,
) -> Result<PerformanceSeries, SeriesError> {
    let len = series.len();
    if window == 0 || window > len {
        return Err(SeriesError::WindowTooLarge { window, len });
    }
    let v = series.values();
    let out = (0..len)
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            v[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
        })
        .collect();
    Ok(series.with_values(out))
}

/// Divides every value by the first one.
pub fn normalize_at_origin(series: &PerformanceSeries) -> Result<PerformanceSeries, SeriesError> {
    let origin = series.values()[0];
    if origin == 0.0 {
        return Err(SeriesError::ZeroOrigin);
    }
    let mut out: Vec<f64> = series.values().iter().map(|v| v / origin).collect();
    out[0] = 1.0;
    Ok(series.with_values(out))
}

/// Splits into months `< cutoff` and months `>= cutoff`. Both halves must be
/// nonempty.
pub fn split_at(
    series: &PerformanceSeries,
    cutoff: MonthStamp,
) -> Result<(PerformanceSeries, PerformanceSeries), SeriesError> {
    let out_of_range = || SeriesError::CutoffOutOfRange {
        cutoff,
        first: series.start(),
        last: series.end(),
    };
    let k = series.index_of(cutoff).ok_or_else(out_of_range)?;
    if k == 0 {
        return Err(out_of_range());
    }
    let (pre, post) = series.values().split_at(k);
    Ok((
        series.with_values(pre.to_vec()),
        PerformanceSeries {
            start: cutoff,
            values: post.to_vec(),
            label: series.label.clone(),
        },
    ))
}
