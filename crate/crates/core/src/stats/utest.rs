use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::{check_finite, midranks, tie_groups};
use crate::error::{Error, Result};

/// Largest n1*n2 for which the p-value is computed by exact enumeration.
pub const DEFAULT_EXACT_CAP: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UMethod {
    Exact,
    NormalApproxTieCorrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UTestOptions {
    pub exact_cap: usize,
}

impl Default for UTestOptions {
    fn default() -> Self {
        Self {
            exact_cap: DEFAULT_EXACT_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UTestResult {
    /// U for the first sample: #{x > y} + 0.5 #{x = y}.
    pub u_statistic: f64,
    /// U for the second sample; `u_statistic + u_other = n1 * n2`.
    pub u_other: f64,
    pub n1: usize,
    pub n2: usize,
    pub p_two_sided: f64,
    pub method: UMethod,
}

impl UTestResult {
    /// True when the first sample tends to take larger values.
    pub fn first_is_greater(&self) -> bool {
        self.u_statistic > self.u_other
    }
}

pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<UTestResult> {
    mann_whitney_u_with(x, y, UTestOptions::default())
}

/// Two-sided Mann-Whitney U test with midranks for ties.
///
/// When `n1 * n2 <= exact_cap` the p-value is exact: the permutation
/// distribution of the (tie-aware) rank sum is enumerated by dynamic
/// programming, and p is the share of arrangements at least as far from
/// n1*n2/2 as the observed U. Otherwise the tie-corrected normal
/// approximation with continuity correction is used.
pub fn mann_whitney_u_with(x: &[f64], y: &[f64], opts: UTestOptions) -> Result<UTestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Domain("Mann-Whitney U needs two non-empty samples".into()));
    }
    check_finite("first sample", x)?;
    check_finite("second sample", y)?;
    let (n1, n2) = (x.len(), y.len());
    let joined: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midranks(&joined);
    let rank_sum_x: f64 = ranks[..n1].iter().sum();
    let u_x = rank_sum_x - (n1 * (n1 + 1)) as f64 / 2.0;
    let u_y = (n1 * n2) as f64 - u_x;

    let (p, method) = if n1 * n2 <= opts.exact_cap {
        (exact_p(&ranks, n1, u_x), UMethod::Exact)
    } else {
        (normal_approx_p(&joined, n1, n2, u_x), UMethod::NormalApproxTieCorrected)
    };
    Ok(UTestResult {
        u_statistic: u_x,
        u_other: u_y,
        n1,
        n2,
        p_two_sided: p,
        method,
    })
}

fn exact_p(ranks: &[f64], n1: usize, u_x: f64) -> f64 {
    let n = ranks.len();
    let n2 = n - n1;
    // doubled midranks are integers
    let doubled: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let m = n1.min(n2);
    let max_sum: usize = {
        let mut d = doubled.clone();
        d.sort_unstable_by(|a, b| b.cmp(a));
        d[..m].iter().sum()
    };
    // counts[k][s]: subsets of size k with doubled rank sum s
    let mut counts = vec![vec![0u128; max_sum + 1]; m + 1];
    counts[0][0] = 1;
    for &r in &doubled {
        for k in (1..=m).rev() {
            let (lower, upper) = counts.split_at_mut(k);
            let prev = &lower[k - 1];
            let cur = &mut upper[0];
            for s in (r..=max_sum).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let nn = (n1 * n2) as i128;
    // doubled U of the size-m subset: 2W - m(m+1)
    let observed_dev = ((2.0 * u_x).round() as i128 - nn).abs();
    let base = (m * (m + 1)) as i128;
    let mut extreme = 0u128;
    let mut total = 0u128;
    for (s, &c) in counts[m].iter().enumerate() {
        if c == 0 {
            continue;
        }
        total += c;
        let dev = (s as i128 - base - nn).abs();
        if dev >= observed_dev {
            extreme += c;
        }
    }
    extreme as f64 / total as f64
}

/// Tie-corrected normal approximation with continuity correction.
pub fn normal_approx_p(joined: &[f64], n1: usize, n2: usize, u_x: f64) -> f64 {
    let n = (n1 + n2) as f64;
    let nn = (n1 * n2) as f64;
    let tie_term: f64 = tie_groups(joined)
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let variance = nn / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if variance <= 0.0 {
        return 1.0;
    }
    let mean = nn / 2.0;
    let z = ((u_x - mean).abs() - 0.5).max(0.0) / variance.sqrt();
    let normal = Normal::standard();
    (2.0 * normal.sf(z)).clamp(f64::MIN_POSITIVE, 1.0)
}
