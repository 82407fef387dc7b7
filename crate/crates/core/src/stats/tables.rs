use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{percent, ResultSet, StatsError};
use crate::taxonomy::StatusCode;

/// Success/failure cross-tabulation for an ordered interpreter pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthTable {
    pub both: u64,
    pub first_only: u64,
    pub second_only: u64,
    pub neither: u64,
    /// Snippets lacking an outcome for either interpreter; not in the counts.
    pub excluded: u64,
}

impl TruthTable {
    pub fn new(both: u64, first_only: u64, second_only: u64, neither: u64) -> Self {
        TruthTable {
            both,
            first_only,
            second_only,
            neither,
            excluded: 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.both + self.first_only + self.second_only + self.neither
    }
}

pub fn truth_table(results: &ResultSet, first: &str, second: &str) -> TruthTable {
    let mut t = TruthTable::default();
    for row in results.rows() {
        match (row.succeeded(first), row.succeeded(second)) {
            (Some(true), Some(true)) => t.both += 1,
            (Some(true), Some(false)) => t.first_only += 1,
            (Some(false), Some(true)) => t.second_only += 1,
            (Some(false), Some(false)) => t.neither += 1,
            _ => t.excluded += 1,
        }
    }
    t
}

/// Percentages derived from a [`TruthTable`], unrounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub total: u64,
    pub first: f64,
    pub second: f64,
    /// Success under either interpreter.
    pub overall: f64,
    pub both: f64,
    /// Of the snippets that ran under the first interpreter, the share that
    /// failed under the second.
    pub first_not_second: f64,
    pub second_not_first: f64,
}

impl RateReport {
    pub fn rounded(&self) -> RateReport {
        use super::round2;
        RateReport {
            total: self.total,
            first: round2(self.first),
            second: round2(self.second),
            overall: round2(self.overall),
            both: round2(self.both),
            first_not_second: round2(self.first_not_second),
            second_not_first: round2(self.second_not_first),
        }
    }
}

pub fn rates(table: &TruthTable) -> Result<RateReport, StatsError> {
    let total = table.total();
    if total == 0 {
        return Err(StatsError::EmptyTable);
    }
    let first_ok = table.both + table.first_only;
    let second_ok = table.both + table.second_only;
    Ok(RateReport {
        total,
        first: percent(first_ok, total),
        second: percent(second_ok, total),
        overall: percent(table.both + table.first_only + table.second_only, total),
        both: percent(table.both, total),
        first_not_second: percent(table.first_only, first_ok),
        second_not_first: percent(table.second_only, second_ok),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusShare {
    pub status: StatusCode,
    pub count: u64,
    pub percent: f64,
}

/// Status counts under one interpreter, most frequent first (ties by
/// numeric id). Percentages are of all snippets evaluated under it.
pub fn status_distribution(results: &ResultSet, interpreter: &str) -> Result<Vec<StatusShare>, StatsError> {
    let mut counts: BTreeMap<StatusCode, u64> = BTreeMap::new();
    let mut total = 0;
    for status in results.rows().iter().filter_map(|r| r.status(interpreter)) {
        *counts.entry(status).or_default() += 1;
        total += 1;
    }
    if total == 0 {
        return Err(StatsError::EmptyResults);
    }
    let mut shares: Vec<StatusShare> = counts
        .into_iter()
        .map(|(status, count)| StatusShare {
            status,
            count,
            percent: percent(count, total),
        })
        .collect();
    shares.sort_by_key(|s| core::cmp::Reverse(s.count));
    Ok(shares)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Exact line count, or the lower bound of the pooled tail bin.
    pub line_count: u32,
    /// True for the single bin holding every snippet longer than `max_line`.
    pub pooled: bool,
    pub percent: f64,
    pub population: u64,
}

/// Executability per exact line count up to `max_line`; longer snippets
/// share one pooled bin. Empty bins and snippets without metadata are
/// left out.
pub fn line_count_curve(results: &ResultSet, interpreter: &str, max_line: u32) -> Vec<CurvePoint> {
    let mut bins: BTreeMap<u32, (u64, u64)> = BTreeMap::new();
    for row in results.rows() {
        let (Some(meta), Some(ok)) = (&row.meta, row.succeeded(interpreter)) else {
            continue;
        };
        let key = meta.line_count.min(max_line.saturating_add(1));
        let bin = bins.entry(key).or_default();
        bin.1 += 1;
        if ok {
            bin.0 += 1;
        }
    }
    bins.into_iter()
        .map(|(line_count, (ok, n))| CurvePoint {
            line_count,
            pooled: line_count > max_line,
            percent: percent(ok, n),
            population: n,
        })
        .collect()
}
