//! Executability statistics over a finished result set.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::Snippet;
use crate::resolve::ExecutionOutcome;
use crate::taxonomy::StatusCode;

mod bootstrap;
mod groups;
mod ranksum;
mod tables;
mod trend;

pub use bootstrap::{
    bootstrap_diff, bootstrap_partition, quantile_sorted, summarize, BootstrapConfig, BootstrapResult,
    DEFAULT_ITERATIONS,
};
pub use groups::{group_compare, GroupComparison, GroupSplit};
pub use ranksum::{ranksum, ranksum_exact, ranksum_normal, EXACT_LIMIT};
pub use tables::{
    line_count_curve, rates, status_distribution, truth_table, CurvePoint, RateReport, StatusShare, TruthTable,
};
pub use trend::{ols, trend, Selector, Trend, TrendBin, TrendPoint};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatsError {
    EmptyTable,
    EmptyResults,
    EmptyGroup,
    TooFewBins,
    NonFinite,
    DuplicateOutcome { snippet_id: u64, interpreter_id: String },
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::EmptyTable => f.write_str("truth table is empty"),
            StatsError::EmptyResults => f.write_str("no results for the requested interpreter"),
            StatsError::EmptyGroup => f.write_str("a comparison group is empty"),
            StatsError::TooFewBins => f.write_str("trend needs at least two non-empty bins"),
            StatsError::NonFinite => f.write_str("input contains NaN or infinite values"),
            StatsError::DuplicateOutcome {
                snippet_id,
                interpreter_id,
            } => write!(f, "snippet {snippet_id} has more than one outcome for {interpreter_id}"),
        }
    }
}

impl core::error::Error for StatsError {}

/// Snippet metadata the analyses group and bin by.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetMeta {
    pub line_count: u32,
    pub created_at: DateTime<Utc>,
    pub is_accepted: bool,
    pub github_ref_count: u32,
}

impl From<&Snippet> for SnippetMeta {
    fn from(s: &Snippet) -> Self {
        SnippetMeta {
            line_count: s.line_count,
            created_at: s.created_at,
            is_accepted: s.is_accepted,
            github_ref_count: s.github_ref_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluated {
    pub snippet_id: u64,
    pub meta: Option<SnippetMeta>,
    pub statuses: BTreeMap<String, StatusCode>,
}

impl Evaluated {
    pub fn status(&self, interpreter: &str) -> Option<StatusCode> {
        self.statuses.get(interpreter).copied()
    }

    pub fn succeeded(&self, interpreter: &str) -> Option<bool> {
        self.status(interpreter).map(|s| s.is_success())
    }
}

/// Final statuses per snippet and interpreter, ordered by snippet id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResultSet {
    rows: Vec<Evaluated>,
}

impl ResultSet {
    /// Join outcomes with optional snippet metadata. More than one outcome
    /// for the same (snippet, interpreter) is an error.
    pub fn build<'a, O, S>(outcomes: O, snippets: S) -> Result<Self, StatsError>
    where
        O: IntoIterator<Item = &'a ExecutionOutcome>,
        S: IntoIterator<Item = &'a Snippet>,
    {
        let mut rows: BTreeMap<u64, Evaluated> = BTreeMap::new();
        for o in outcomes {
            let row = rows.entry(o.snippet_id).or_insert_with(|| Evaluated {
                snippet_id: o.snippet_id,
                meta: None,
                statuses: BTreeMap::new(),
            });
            if row.statuses.insert(o.interpreter_id.clone(), o.final_status).is_some() {
                return Err(StatsError::DuplicateOutcome {
                    snippet_id: o.snippet_id,
                    interpreter_id: o.interpreter_id.clone(),
                });
            }
        }
        for s in snippets {
            if let Some(row) = rows.get_mut(&s.snippet_id) {
                row.meta = Some(SnippetMeta::from(s));
            }
        }
        Ok(ResultSet {
            rows: rows.into_values().collect(),
        })
    }

    pub fn from_rows(mut rows: Vec<Evaluated>) -> Self {
        rows.sort_by_key(|r| r.snippet_id);
        ResultSet { rows }
    }

    pub fn rows(&self) -> &[Evaluated] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Interpreter ids present anywhere in the set, sorted.
    pub fn interpreters(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.rows.iter().flat_map(|r| r.statuses.keys().cloned()).collect();
        ids.sort();
        ids.dedup();
        ids
    }
}

/// `count / total` as a percentage; zero when `total` is zero.
pub fn percent(count: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 * 100.0 / total as f64
    }
}

/// Round half away from zero to two decimals, as printed in reports.
pub fn round2(x: f64) -> f64 {
    libm::round(x * 100.0) / 100.0
}
