//! Analysis report: JSON, plain-text tables and CSV series.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use snipex_core::stats::{
    self, group_compare, line_count_curve, rates, status_distribution, trend, truth_table, BootstrapConfig, CurvePoint,
    GroupComparison, GroupSplit, RateReport, ResultSet, Selector, StatusShare, Trend, TrendBin, TruthTable,
};
use snipex_core::taxonomy::TAXONOMY_VERSION;
use snipex_core::{ExecutionOutcome, Snippet};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_LINE: u32 = 20;
pub const DEFAULT_TOP: usize = 10;

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    /// Ordered interpreter pair; the two interpreters present when unset.
    pub pair: Option<(String, String)>,
    pub max_line: u32,
    pub trend_bin: TrendBin,
    pub bootstrap: BootstrapConfig,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            pair: None,
            max_line: DEFAULT_MAX_LINE,
            trend_bin: TrendBin::Year,
            bootstrap: BootstrapConfig::default(),
        }
    }
}

/// A report section that may not be computable for the given data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section<T> {
    Ok(T),
    Unavailable(String),
}

impl<T> Section<T> {
    fn from_result<E: std::fmt::Display>(r: std::result::Result<T, E>) -> Self {
        match r {
            Ok(v) => Section::Ok(v),
            Err(e) => Section::Unavailable(e.to_string()),
        }
    }

    pub fn ok(&self) -> Option<&T> {
        match self {
            Section::Ok(v) => Some(v),
            Section::Unavailable(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub first: String,
    pub second: String,
    pub truth_table: TruthTable,
    pub rates: Section<RateReport>,
    pub rates_rounded: Section<RateReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledTrend {
    pub selector: Selector,
    pub trend: Section<Trend>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledComparison {
    pub split: GroupSplit,
    pub selector: Selector,
    pub comparison: Section<GroupComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub taxonomy_version: String,
    pub snippets: usize,
    pub with_metadata: usize,
    pub interpreters: Vec<String>,
    pub status_distribution: BTreeMap<String, Section<Vec<StatusShare>>>,
    pub pair: Option<PairReport>,
    pub line_count_curves: BTreeMap<String, Vec<CurvePoint>>,
    pub trends: Vec<LabelledTrend>,
    pub group_comparisons: Vec<LabelledComparison>,
}

/// Compute every analysis the data supports.
pub fn analyze(outcomes: &[ExecutionOutcome], snippets: &[Snippet], options: &AnalysisOptions) -> Result<Report> {
    if outcomes.is_empty() {
        return Err(Error::Usage("no outcomes to analyze; run the evaluation first".into()));
    }
    let rs = ResultSet::build(outcomes, snippets)?;
    let interpreters = rs.interpreters();
    let pair = match &options.pair {
        Some((a, b)) => {
            for id in [a, b] {
                if !interpreters.contains(id) {
                    return Err(Error::Usage(format!("no outcomes for interpreter {id:?}")));
                }
            }
            Some((a.clone(), b.clone()))
        }
        None if interpreters.len() == 2 => Some((interpreters[0].clone(), interpreters[1].clone())),
        None => None,
    };

    let status_distribution = interpreters
        .iter()
        .map(|i| (i.clone(), Section::from_result(status_distribution(&rs, i))))
        .collect();
    let line_count_curves = interpreters
        .iter()
        .map(|i| (i.clone(), line_count_curve(&rs, i, options.max_line)))
        .collect();

    let mut selectors: Vec<Selector> = Vec::new();
    let pair_report = pair.as_ref().map(|(first, second)| {
        let table = truth_table(&rs, first, second);
        let r = rates(&table);
        selectors.push(Selector::Overall {
            first: first.clone(),
            second: second.clone(),
        });
        PairReport {
            first: first.clone(),
            second: second.clone(),
            truth_table: table,
            rates_rounded: Section::from_result(r.as_ref().map(RateReport::rounded).map_err(Clone::clone)),
            rates: Section::from_result(r),
        }
    });
    selectors.extend(interpreters.iter().map(|i| Selector::Single { interpreter: i.clone() }));
    if let Some((first, second)) = &pair {
        selectors.push(Selector::FirstOnly {
            first: first.clone(),
            second: second.clone(),
        });
        selectors.push(Selector::SecondOnly {
            first: first.clone(),
            second: second.clone(),
        });
    }
    let trends = selectors
        .iter()
        .map(|s| LabelledTrend {
            selector: s.clone(),
            trend: Section::from_result(trend(&rs, s, options.trend_bin)),
        })
        .collect();
    let headline = selectors[0].clone();
    let group_comparisons = [GroupSplit::AcceptedVsNot, GroupSplit::GithubRefVsNot]
        .into_iter()
        .map(|split| LabelledComparison {
            split,
            selector: headline.clone(),
            comparison: Section::from_result(group_compare(&rs, split, &headline, &options.bootstrap)),
        })
        .collect();

    Ok(Report {
        taxonomy_version: TAXONOMY_VERSION.into(),
        snippets: rs.len(),
        with_metadata: rs.rows().iter().filter(|r| r.meta.is_some()).count(),
        interpreters,
        status_distribution,
        pair: pair_report,
        line_count_curves,
        trends,
        group_comparisons,
    })
}

/// Most frequent statuses side by side, one column pair per interpreter.
/// Rows are the `top` statuses by combined count, ordered by the first
/// interpreter's count; statuses an interpreter never produced show N/A.
pub fn render_status_table(report: &Report, top: usize) -> String {
    let columns: Vec<(&String, &Vec<StatusShare>)> = report
        .interpreters
        .iter()
        .filter_map(|i| report.status_distribution.get(i).and_then(Section::ok).map(|d| (i, d)))
        .collect();
    let lookup = |dist: &[StatusShare], name: &str| dist.iter().find(|s| s.status.name() == name).cloned();

    let mut combined: BTreeMap<&str, u64> = BTreeMap::new();
    for (_, dist) in &columns {
        for s in dist.iter() {
            *combined.entry(s.status.name()).or_default() += s.count;
        }
    }
    let mut names: Vec<&str> = combined.keys().copied().collect();
    names.sort_by(|a, b| combined[b].cmp(&combined[a]).then(a.cmp(b)));
    names.truncate(top);
    let counts = |name: &str| -> Vec<u64> {
        columns
            .iter()
            .map(|(_, d)| lookup(d, name).map_or(0, |s| s.count))
            .collect()
    };
    names.sort_by(|a, b| {
        let (ca, cb) = (counts(a), counts(b));
        let key = |c: &[u64]| c.iter().map(|n| std::cmp::Reverse(*n)).collect::<Vec<_>>();
        key(&ca).cmp(&key(&cb)).then(a.cmp(b))
    });

    let mut out = String::new();
    let _ = write!(out, "{:<22}", "Status Name");
    for (id, _) in &columns {
        let _ = write!(out, "{:>12}{:>8}", format!("{id} Count"), "%");
    }
    out.push('\n');
    for name in names {
        let _ = write!(out, "{name:<22}");
        for (_, dist) in &columns {
            match lookup(dist, name) {
                Some(s) => {
                    let _ = write!(out, "{:>12}{:>8.2}", s.count, s.percent);
                }
                None => {
                    let _ = write!(out, "{:>12}{:>8}", "N/A", "N/A");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// The four-way table for the interpreter pair followed by the rates.
pub fn render_truth_table(report: &Report) -> Result<String> {
    let pair = report
        .pair
        .as_ref()
        .ok_or_else(|| Error::Usage("the truth table needs exactly two interpreters or --pair".into()))?;
    let t = &pair.truth_table;
    let total = t.total();
    let mut out = String::new();
    let (a, b) = (
        format!("{} Execution", pair.first),
        format!("{} Execution", pair.second),
    );
    let _ = writeln!(out, "{a:<16}{b:<16}{:>10}{:>9}", "Count", "%");
    for (x, y, n) in [
        ("Yes", "Yes", t.both),
        ("Yes", "No", t.first_only),
        ("No", "Yes", t.second_only),
        ("No", "No", t.neither),
    ] {
        let _ = writeln!(out, "{x:<16}{y:<16}{n:>10}{:>9.2}", stats::percent(n, total));
    }
    let _ = writeln!(out, "{:<32}{total:>10}", "Total");
    if t.excluded > 0 {
        let _ = writeln!(out, "{:<32}{:>10}", "Excluded (missing a side)", t.excluded);
    }
    out.push('\n');
    match &pair.rates_rounded {
        Section::Ok(r) => {
            let _ = writeln!(out, "{} success rate: {:.2}%", pair.first, r.first);
            let _ = writeln!(out, "{} success rate: {:.2}%", pair.second, r.second);
            let _ = writeln!(out, "Overall success rate (either): {:.2}%", r.overall);
            let _ = writeln!(out, "Ran in both: {:.2}%", r.both);
            let _ = writeln!(
                out,
                "Ran in {} but not {}: {:.2}%",
                pair.first, pair.second, r.first_not_second
            );
            let _ = writeln!(
                out,
                "Ran in {} but not {}: {:.2}%",
                pair.second, pair.first, r.second_not_first
            );
        }
        Section::Unavailable(why) => {
            let _ = writeln!(out, "Rates unavailable: {why}");
        }
    }
    Ok(out)
}

/// Trends and group comparisons as text.
pub fn render_summary(report: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Snippets: {} ({} with metadata)",
        report.snippets, report.with_metadata
    );
    for t in &report.trends {
        let label = selector_label(&t.selector);
        match &t.trend {
            Section::Ok(tr) => {
                let _ = writeln!(
                    out,
                    "Trend {label}: {:+.3} pp/year over {} bins",
                    tr.slope,
                    tr.points.len()
                );
            }
            Section::Unavailable(why) => {
                let _ = writeln!(out, "Trend {label}: unavailable ({why})");
            }
        }
    }
    for g in &report.group_comparisons {
        let split = match g.split {
            GroupSplit::AcceptedVsNot => "accepted vs not",
            GroupSplit::GithubRefVsNot => "github-referenced vs not",
        };
        match &g.comparison {
            Section::Ok(c) => {
                let _ = writeln!(
                    out,
                    "{split}: {:.2}% (n={}) vs {:.2}% (n={}); diff {:.2} pp, 95% CI [{:.2}, {:.2}], rank-sum p={:.4e}",
                    c.in_group_rate,
                    c.in_group_size,
                    c.out_group_rate,
                    c.out_group_size,
                    c.bootstrap.mean_diff,
                    c.bootstrap.ci_low,
                    c.bootstrap.ci_high,
                    c.ranksum_p
                );
                let lift = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:+.2}%"));
                let _ = writeln!(
                    out,
                    "  relative lift vs rest {}, vs all {}",
                    lift(c.relative_lift_vs_out_group),
                    lift(c.relative_lift_vs_all)
                );
            }
            Section::Unavailable(why) => {
                let _ = writeln!(out, "{split}: unavailable ({why})");
            }
        }
    }
    out
}

pub fn selector_label(s: &Selector) -> String {
    match s {
        Selector::Overall { first, second } => format!("overall({first},{second})"),
        Selector::Single { interpreter } => interpreter.clone(),
        Selector::FirstOnly { first, second } => format!("{first}-not-{second}"),
        Selector::SecondOnly { first, second } => format!("{second}-not-{first}"),
    }
}

/// Write the figure series as CSV files into `dir`.
pub fn write_series(report: &Report, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let csv_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source: csv::Error| Error::Csv {
            path: path.clone(),
            source,
        }
    };
    for (interp, curve) in &report.line_count_curves {
        let path = dir.join(format!("line_count_{interp}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(["line_count", "pooled", "percent", "population"])
            .map_err(csv_err(&path))?;
        for p in curve {
            w.write_record([
                p.line_count.to_string(),
                p.pooled.to_string(),
                p.percent.to_string(),
                p.population.to_string(),
            ])
            .map_err(csv_err(&path))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    for t in &report.trends {
        let Section::Ok(tr) = &t.trend else { continue };
        let path = dir.join(format!(
            "trend_{}.csv",
            selector_label(&t.selector).replace(['(', ')', ','], "_")
        ));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(["bin_start", "midpoint", "percent", "population"])
            .map_err(csv_err(&path))?;
        for p in &tr.points {
            w.write_record([
                p.bin_start.to_string(),
                p.midpoint.to_string(),
                p.percent.to_string(),
                p.population.to_string(),
            ])
            .map_err(csv_err(&path))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
