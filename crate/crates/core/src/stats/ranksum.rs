use alloc::vec;
use alloc::vec::Vec;

use super::StatsError;

/// Combined sample size up to which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 20;

/// Two-sided p-value of the two-sample rank-sum (Mann–Whitney) test.
///
/// Exact permutation distribution of the midrank sum when the combined size
/// is at most [`EXACT_LIMIT`], otherwise the normal approximation with tie
/// and continuity corrections.
pub fn ranksum(group_a: &[f64], group_b: &[f64]) -> Result<f64, StatsError> {
    if group_a.len() + group_b.len() <= EXACT_LIMIT {
        ranksum_exact(group_a, group_b)
    } else {
        ranksum_normal(group_a, group_b)
    }
}

/// Midranks of the pooled sample, doubled so ties stay integral.
/// Returns the doubled ranks in input order (`a` then `b`) and the tie
/// group sizes.
fn doubled_midranks(a: &[f64], b: &[f64]) -> Result<(Vec<u64>, Vec<u64>), StatsError> {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    if pooled.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&i, &j| pooled[i].total_cmp(&pooled[j]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share rank (start+1+end)/2
        let doubled = (start + 1 + end) as u64;
        for &i in &order[start..end] {
            ranks[i] = doubled;
        }
        ties.push((end - start) as u64);
        start = end;
    }
    Ok((ranks, ties))
}

fn nonempty(a: &[f64], b: &[f64]) -> Result<(), StatsError> {
    if a.is_empty() || b.is_empty() {
        Err(StatsError::EmptyGroup)
    } else {
        Ok(())
    }
}

/// Exact two-sided p-value: the share of all `C(n, n_a)` assignments of the
/// pooled midranks to group `a` whose rank sum is at least as far from its
/// mean as the observed one. Counted by dynamic programming over sums.
pub fn ranksum_exact(group_a: &[f64], group_b: &[f64]) -> Result<f64, StatsError> {
    nonempty(group_a, group_b)?;
    let (ranks, _) = doubled_midranks(group_a, group_b)?;
    let n = ranks.len();
    let k = group_a.len();
    let total: u64 = ranks.iter().sum();
    let observed: u64 = ranks[..k].iter().sum();

    // ways[j][s]: subsets of size j with doubled rank sum s
    let mut ways = vec![vec![0u128; total as usize + 1]; k + 1];
    ways[0][0] = 1;
    for &r in &ranks {
        let r = r as usize;
        for j in (1..=k).rev() {
            for s in (r..=total as usize).rev() {
                ways[j][s] += ways[j - 1][s - r];
            }
        }
    }
    // compare |s − mean| via |n·s − k·total| to stay in integers
    let dev = |s: u64| (n as i128 * s as i128 - k as i128 * total as i128).abs();
    let threshold = dev(observed);
    let mut extreme = 0u128;
    let mut all = 0u128;
    for (s, &w) in ways[k].iter().enumerate() {
        all += w;
        if dev(s as u64) >= threshold {
            extreme += w;
        }
    }
    Ok(extreme as f64 / all as f64)
}

/// Normal approximation with tie-corrected variance and a 0.5 continuity
/// correction.
pub fn ranksum_normal(group_a: &[f64], group_b: &[f64]) -> Result<f64, StatsError> {
    nonempty(group_a, group_b)?;
    let (ranks, ties) = doubled_midranks(group_a, group_b)?;
    let na = group_a.len() as f64;
    let nb = group_b.len() as f64;
    let n = na + nb;
    let rank_sum_a = ranks[..group_a.len()].iter().sum::<u64>() as f64 / 2.0;
    let u = rank_sum_a - na * (na + 1.0) / 2.0;
    let mean = na * nb / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let variance = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if variance <= 0.0 {
        return Ok(1.0);
    }
    let z = ((u - mean).abs() - 0.5).max(0.0) / libm::sqrt(variance);
    Ok(libm::erfc(z / core::f64::consts::SQRT_2).min(1.0))
}
