use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{percent, Evaluated, ResultSet, StatsError};

/// Which per-snippet boolean a trend or group comparison tracks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Selector {
    /// Success under either interpreter of the pair.
    Overall {
        first: String,
        second: String,
    },
    Single {
        interpreter: String,
    },
    /// Success under `first` and failure under `second`.
    FirstOnly {
        first: String,
        second: String,
    },
    SecondOnly {
        first: String,
        second: String,
    },
}

impl Selector {
    /// The tracked boolean, or `None` if the snippet lacks a needed outcome.
    pub fn indicator(&self, row: &Evaluated) -> Option<bool> {
        match self {
            Selector::Single { interpreter } => row.succeeded(interpreter),
            Selector::Overall { first, second } => Some(row.succeeded(first)? || row.succeeded(second)?),
            Selector::FirstOnly { first, second } => Some(row.succeeded(first)? && !row.succeeded(second)?),
            Selector::SecondOnly { first, second } => Some(!row.succeeded(first)? && row.succeeded(second)?),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendBin {
    #[default]
    Year,
    Month,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub bin_start: NaiveDate,
    /// Bin midpoint in fractional calendar years.
    pub midpoint: f64,
    pub percent: f64,
    pub population: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub points: Vec<TrendPoint>,
    /// Percentage points per year.
    pub slope: f64,
    pub intercept: f64,
}

/// Bin snippets by creation date, compute executability per bin and fit a
/// least-squares line through (bin midpoint, percent).
pub fn trend(results: &ResultSet, selector: &Selector, bin: TrendBin) -> Result<Trend, StatsError> {
    let mut bins: BTreeMap<(i32, u32), (u64, u64)> = BTreeMap::new();
    for row in results.rows() {
        let (Some(meta), Some(hit)) = (&row.meta, selector.indicator(row)) else {
            continue;
        };
        let date = meta.created_at.date_naive();
        let key = match bin {
            TrendBin::Year => (date.year(), 1),
            TrendBin::Month => (date.year(), date.month()),
        };
        let cell = bins.entry(key).or_default();
        cell.1 += 1;
        if hit {
            cell.0 += 1;
        }
    }
    if bins.len() < 2 {
        return Err(StatsError::TooFewBins);
    }
    let points: Vec<TrendPoint> = bins
        .into_iter()
        .map(|((year, month), (hits, n))| {
            let midpoint = match bin {
                TrendBin::Year => year as f64 + 0.5,
                TrendBin::Month => year as f64 + (month as f64 - 0.5) / 12.0,
            };
            TrendPoint {
                bin_start: NaiveDate::from_ymd_opt(year, month, 1).expect("valid month"),
                midpoint,
                percent: percent(hits, n),
                population: n,
            }
        })
        .collect();
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.midpoint, p.percent)).collect();
    let (slope, intercept) = ols(&xy)?;
    Ok(Trend {
        points,
        slope,
        intercept,
    })
}

/// Ordinary least squares `y = slope·x + intercept`, accumulated in one
/// pass with running means and co-moments.
pub fn ols(points: &[(f64, f64)]) -> Result<(f64, f64), StatsError> {
    if points.len() < 2 {
        return Err(StatsError::TooFewBins);
    }
    let (mut n, mut mx, mut my, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        if !x.is_finite() || !y.is_finite() {
            return Err(StatsError::NonFinite);
        }
        n += 1.0;
        let dx = x - mx;
        mx += dx / n;
        my += (y - my) / n;
        sxx += dx * (x - mx);
        sxy += dx * (y - my);
    }
    if sxx == 0.0 {
        return Err(StatsError::TooFewBins);
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}
