use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_diff, BootstrapConfig, BootstrapResult};
use super::ranksum::ranksum;
use super::trend::Selector;
use super::{ResultSet, SnippetMeta, StatsError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupSplit {
    AcceptedVsNot,
    GithubRefVsNot,
}

impl GroupSplit {
    fn member(self, meta: &SnippetMeta) -> bool {
        match self {
            GroupSplit::AcceptedVsNot => meta.is_accepted,
            GroupSplit::GithubRefVsNot => meta.github_ref_count > 0,
        }
    }
}

/// In-group (accepted / referenced) against everything else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub split: GroupSplit,
    pub in_group_size: u64,
    pub out_group_size: u64,
    pub in_group_rate: f64,
    pub out_group_rate: f64,
    pub all_rate: f64,
    /// `in_rate / out_rate − 1`, as a percentage.
    pub relative_lift_vs_out_group: Option<f64>,
    /// `in_rate / all_rate − 1`, as a percentage.
    pub relative_lift_vs_all: Option<f64>,
    pub bootstrap: BootstrapResult,
    pub ranksum_p: f64,
}

fn rate(group: &[bool]) -> f64 {
    super::percent(group.iter().filter(|b| **b).count() as u64, group.len() as u64)
}

fn lift(numerator: f64, denominator: f64) -> Option<f64> {
    (denominator > 0.0).then(|| (numerator / denominator - 1.0) * 100.0)
}

pub fn group_compare(
    results: &ResultSet,
    split: GroupSplit,
    selector: &Selector,
    config: &BootstrapConfig,
) -> Result<GroupComparison, StatsError> {
    let mut in_group: Vec<bool> = Vec::new();
    let mut out_group: Vec<bool> = Vec::new();
    for row in results.rows() {
        let (Some(meta), Some(hit)) = (&row.meta, selector.indicator(row)) else {
            continue;
        };
        if split.member(meta) {
            in_group.push(hit);
        } else {
            out_group.push(hit);
        }
    }
    if in_group.is_empty() || out_group.is_empty() {
        return Err(StatsError::EmptyGroup);
    }
    let bootstrap = bootstrap_diff(&in_group, &out_group, config)?;
    let as_f64 = |g: &[bool]| g.iter().map(|&b| f64::from(u8::from(b))).collect::<Vec<f64>>();
    let ranksum_p = ranksum(&as_f64(&in_group), &as_f64(&out_group))?;
    let in_rate = rate(&in_group);
    let out_rate = rate(&out_group);
    let all: Vec<bool> = in_group.iter().chain(&out_group).copied().collect();
    let all_rate = rate(&all);
    Ok(GroupComparison {
        split,
        in_group_size: in_group.len() as u64,
        out_group_size: out_group.len() as u64,
        in_group_rate: in_rate,
        out_group_rate: out_rate,
        all_rate,
        relative_lift_vs_out_group: lift(in_rate, out_rate),
        relative_lift_vs_all: lift(in_rate, all_rate),
        bootstrap,
        ranksum_p,
    })
}
