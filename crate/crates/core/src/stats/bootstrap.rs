use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use super::StatsError;

pub const DEFAULT_ITERATIONS: u32 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub iterations: u32,
    pub seed: u64,
    /// Iterations are split into this many independently seeded streams.
    /// Part of the reproducibility contract: changing it changes results.
    pub partitions: u32,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
            partitions: 1,
        }
    }
}

/// Difference of success rates `a − b` in percentage points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub mean_diff: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub iterations: u32,
    pub seed: u64,
}

/// Iterations assigned to partition `index` and the seed its stream uses.
fn partition_plan(config: &BootstrapConfig, index: u32) -> (u32, u64) {
    let parts = config.partitions.max(1);
    let base = config.iterations / parts;
    let extra = u32::from(index < config.iterations % parts);
    let seed = if parts == 1 {
        config.seed
    } else {
        splitmix64(config.seed ^ splitmix64(u64::from(index) + 1))
    };
    (base + extra, seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform integer in `0..n` by rejection, so no modulo bias.
fn below(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    let zone = u64::MAX - (u64::MAX - n + 1) % n;
    loop {
        let v = rng.next_u64();
        if v <= zone {
            return v % n;
        }
    }
}

fn resampled_rate(rng: &mut ChaCha8Rng, group: &[bool]) -> f64 {
    let n = group.len() as u64;
    let hits = (0..n).filter(|_| group[below(rng, n) as usize]).count();
    hits as f64 * 100.0 / n as f64
}

/// The raw differences produced by one partition of the iterations.
pub fn bootstrap_partition(group_a: &[bool], group_b: &[bool], config: &BootstrapConfig, index: u32) -> Vec<f64> {
    let (count, seed) = partition_plan(config, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let a = resampled_rate(&mut rng, group_a);
            let b = resampled_rate(&mut rng, group_b);
            a - b
        })
        .collect()
}

/// Bootstrap the difference between the success rates of two groups.
///
/// Each iteration resamples both groups with replacement at their own
/// size. The interval is the 2.5th/97.5th empirical percentile with linear
/// interpolation between order statistics. Fully determined by the inputs
/// and `config`.
pub fn bootstrap_diff(
    group_a: &[bool],
    group_b: &[bool],
    config: &BootstrapConfig,
) -> Result<BootstrapResult, StatsError> {
    check(group_a, group_b, config)?;
    let diffs: Vec<f64> = (0..config.partitions.max(1))
        .flat_map(|i| bootstrap_partition(group_a, group_b, config, i))
        .collect();
    Ok(summarize(diffs, config))
}

pub(crate) fn check(group_a: &[bool], group_b: &[bool], config: &BootstrapConfig) -> Result<(), StatsError> {
    if group_a.is_empty() || group_b.is_empty() || config.iterations == 0 {
        return Err(StatsError::EmptyGroup);
    }
    Ok(())
}

/// Turn collected differences (in partition order) into the summary.
pub fn summarize(mut diffs: Vec<f64>, config: &BootstrapConfig) -> BootstrapResult {
    let mean_diff = diffs.iter().sum::<f64>() / diffs.len() as f64;
    diffs.sort_by(f64::total_cmp);
    BootstrapResult {
        mean_diff,
        ci_low: quantile_sorted(&diffs, 0.025),
        ci_high: quantile_sorted(&diffs, 0.975),
        iterations: config.iterations,
        seed: config.seed,
    }
}

/// Linear interpolation between order statistics at `h = (n − 1)·p`.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = libm::floor(h) as usize;
    let hi = libm::ceil(h) as usize;
    let (a, b) = (sorted[lo], sorted[hi]);
    if a == b {
        a
    } else {
        a + (h - lo as f64) * (b - a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cfg(iterations: u32, seed: u64) -> BootstrapConfig {
        BootstrapConfig {
            iterations,
            seed,
            partitions: 1,
        }
    }

    /// Second bootstrap: xorshift generator, float-scaled index draws, and
    /// nearest-rank sorting via a fresh quantile routine.
    fn oracle(a: &[bool], b: &[bool], iterations: usize, seed: u64) -> (f64, f64, f64) {
        let mut state = seed.wrapping_mul(2685821657736338717).max(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut diffs = Vec::with_capacity(iterations);
        for _ in 0..iterations {
            let mut ra = 0.0;
            for _ in 0..a.len() {
                if a[(next() * a.len() as f64) as usize] {
                    ra += 1.0;
                }
            }
            let mut rb = 0.0;
            for _ in 0..b.len() {
                if b[(next() * b.len() as f64) as usize] {
                    rb += 1.0;
                }
            }
            diffs.push(100.0 * ra / a.len() as f64 - 100.0 * rb / b.len() as f64);
        }
        let mean = diffs.iter().sum::<f64>() / iterations as f64;
        diffs.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let q = |p: f64| {
            let pos = p * (iterations - 1) as f64;
            let i = pos as usize;
            diffs[i] + (pos - i as f64) * (diffs[(i + 1).min(iterations - 1)] - diffs[i])
        };
        (mean, q(0.025), q(0.975))
    }

    fn bernoulli(n: usize, p: f64, seed: u64) -> Vec<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 <= p)
            .collect()
    }

    #[test]
    fn zero_variance_is_degenerate() {
        let r = bootstrap_diff(&[true; 50], &[false; 30], &cfg(10_000, 3)).unwrap();
        assert_eq!((r.mean_diff, r.ci_low, r.ci_high), (100.0, 100.0, 100.0));
    }

    #[test]
    fn identical_groups_center_on_zero() {
        let g: Vec<bool> = (0..200).map(|i| i % 3 == 0).collect();
        let r = bootstrap_diff(&g, &g, &cfg(1000, 1)).unwrap();
        assert!(r.mean_diff.abs() <= 1.0, "{}", r.mean_diff);
        assert!(r.ci_low <= 0.0 && 0.0 <= r.ci_high);
    }

    #[test]
    fn seed_determinism() {
        let a = bernoulli(300, 0.4, 1);
        let b = bernoulli(250, 0.3, 2);
        let c = cfg(2000, 99);
        assert_eq!(bootstrap_diff(&a, &b, &c).unwrap(), bootstrap_diff(&a, &b, &c).unwrap());
        let other = bootstrap_diff(&a, &b, &cfg(2000, 100)).unwrap();
        assert_ne!(other, bootstrap_diff(&a, &b, &c).unwrap());
    }

    #[test]
    fn partitions_cover_all_iterations() {
        let a = bernoulli(40, 0.5, 1);
        let c = BootstrapConfig {
            iterations: 1001,
            seed: 5,
            partitions: 4,
        };
        let total: usize = (0..4).map(|i| bootstrap_partition(&a, &a, &c, i).len()).sum();
        assert_eq!(total, 1001);
        assert_eq!(bootstrap_diff(&a, &a, &c).unwrap(), bootstrap_diff(&a, &a, &c).unwrap());
    }

    #[test]
    fn empty_group_rejected() {
        assert_eq!(bootstrap_diff(&[], &[true], &cfg(10, 0)), Err(StatsError::EmptyGroup));
        assert_eq!(bootstrap_diff(&[true], &[], &cfg(10, 0)), Err(StatsError::EmptyGroup));
    }

    #[test]
    fn quantile_interpolates() {
        let s = [0.0, 10.0, 20.0, 30.0, 40.0];
        assert_eq!(quantile_sorted(&s, 0.5), 20.0);
        assert_eq!(quantile_sorted(&s, 0.025), 1.0);
        assert_eq!(quantile_sorted(&s, 0.975), 39.0);
        assert_eq!(quantile_sorted(&[7.0], 0.975), 7.0);
    }

    #[test]
    fn small_groups_agree_with_oracle() {
        let a = bernoulli(400, 0.5, 11);
        let b = bernoulli(400, 0.25, 12);
        let r = bootstrap_diff(&a, &b, &cfg(4000, 7)).unwrap();
        let (mean, lo, hi) = oracle(&a, &b, 4000, 7);
        assert!((r.mean_diff - mean).abs() < 0.5, "{} vs {}", r.mean_diff, mean);
        assert!((r.ci_low - lo).abs() < 1.0 && (r.ci_high - hi).abs() < 1.0);
        let _ = vec![0];
    }
}
