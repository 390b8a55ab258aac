use statrs::distribution::ContinuousCDF;

use super::{average_ranks, standard_normal, tie_term, two_sided, HypothesisTestResult, TestMode};
use crate::analytics::AnalyticsError;

/// Largest sample the signed-rank test treats exactly in `Auto` mode.
pub const SIGNED_RANK_EXACT_MAX: usize = 25;
/// Largest pooled size the rank-sum test treats exactly in `Auto` mode.
pub const RANK_SUM_EXACT_MAX: usize = 20;

// u128 counts stay exact up to these sizes
const SIGNED_RANK_EXACT_LIMIT: usize = 120;
const RANK_SUM_EXACT_LIMIT: usize = 100;

/// Paired test on `a − b`. Zero differences are dropped.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)], mode: TestMode) -> Result<HypothesisTestResult, AnalyticsError> {
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
    signed_rank(&diffs, mode, "wilcoxon_signed_rank")
}

/// Signed-rank test of `x − mu0`, with the Hodges–Lehmann pseudo-median of
/// `x` as the estimate.
pub fn wilcoxon_one_sample(x: &[f64], mu0: f64, mode: TestMode) -> Result<HypothesisTestResult, AnalyticsError> {
    let diffs: Vec<f64> = x.iter().map(|v| v - mu0).collect();
    let mut result = signed_rank(&diffs, mode, "wilcoxon_one_sample")?;
    result.estimate = Some(hodges_lehmann(x)?);
    Ok(result)
}

/// Median of all Walsh averages `(x_i + x_j) / 2` with `i <= j`.
pub fn hodges_lehmann(x: &[f64]) -> Result<f64, AnalyticsError> {
    if x.is_empty() {
        return Err(AnalyticsError::DegenerateSample("empty sample".into()));
    }
    let mut walsh = Vec::with_capacity(x.len() * (x.len() + 1) / 2);
    for i in 0..x.len() {
        for j in i..x.len() {
            walsh.push((x[i] + x[j]) / 2.0);
        }
    }
    super::median(&walsh)
}

fn signed_rank(diffs: &[f64], mode: TestMode, method: &str) -> Result<HypothesisTestResult, AnalyticsError> {
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(AnalyticsError::InvalidInput("non-finite observation".into()));
    }
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    if n == 0 {
        return Err(AnalyticsError::DegenerateSample("all differences are zero".into()));
    }
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = average_ranks(&abs);
    let w_plus: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();

    let exact = match mode {
        TestMode::Exact => true,
        TestMode::Approx => false,
        TestMode::Auto => n <= SIGNED_RANK_EXACT_MAX,
    };
    let mut result = HypothesisTestResult {
        method: method.to_string(),
        statistic: w_plus,
        z: None,
        exact,
        p: 1.0,
        p_less: 1.0,
        p_greater: 1.0,
        n,
        m: None,
        estimate: None,
    };

    if exact {
        if n > SIGNED_RANK_EXACT_LIMIT {
            return Err(AnalyticsError::TooLargeForExact(n));
        }
        // doubled ranks are integers even with mid-ranks
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let total: usize = doubled.iter().sum();
        let mut counts = vec![0u128; total + 1];
        counts[0] = 1;
        let mut reach = 0;
        for &r in &doubled {
            for s in (0..=reach).rev() {
                if counts[s] != 0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let observed = (2.0 * w_plus).round() as usize;
        let below: u128 = counts[..=observed].iter().sum();
        let above: u128 = counts[observed..].iter().sum();
        let space = (1u128 << n) as f64;
        result.p_less = below as f64 / space;
        result.p_greater = above as f64 / space;
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term(&ties) / 48.0;
        if var <= 0.0 {
            return Err(AnalyticsError::DegenerateSample("zero variance under the null".into()));
        }
        let sd = var.sqrt();
        let normal = standard_normal();
        let diff = w_plus - mean;
        let z = diff.signum() * (diff.abs() - 0.5).max(0.0) / sd;
        result.z = Some(z);
        result.p_greater = normal.sf((diff - 0.5) / sd);
        result.p_less = normal.cdf((diff + 0.5) / sd);
    }
    result.p = two_sided(result.p_less, result.p_greater);
    Ok(result)
}

/// Mann–Whitney rank-sum test; the statistic is U for `x`.
pub fn wilcoxon_rank_sum(x: &[f64], y: &[f64], mode: TestMode) -> Result<HypothesisTestResult, AnalyticsError> {
    if x.is_empty() || y.is_empty() {
        return Err(AnalyticsError::DegenerateSample("both samples must be non-empty".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(AnalyticsError::InvalidInput("non-finite observation".into()));
    }
    let (n, m) = (x.len(), y.len());
    let big_n = n + m;
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (ranks, ties) = average_ranks(&pooled);
    let r1: f64 = ranks[..n].iter().sum();
    let u = r1 - (n * (n + 1)) as f64 / 2.0;

    let exact = match mode {
        TestMode::Exact => true,
        TestMode::Approx => false,
        TestMode::Auto => big_n <= RANK_SUM_EXACT_MAX,
    };
    let mut result = HypothesisTestResult {
        method: "wilcoxon_rank_sum".to_string(),
        statistic: u,
        z: None,
        exact,
        p: 1.0,
        p_less: 1.0,
        p_greater: 1.0,
        n,
        m: Some(m),
        estimate: None,
    };

    let (nf, mf, bf) = (n as f64, m as f64, big_n as f64);
    let mean = nf * mf / 2.0;
    let var = nf * mf / 12.0 * ((bf + 1.0) - tie_term(&ties) / (bf * (bf - 1.0)));

    if exact {
        if big_n > RANK_SUM_EXACT_LIMIT {
            return Err(AnalyticsError::TooLargeForExact(big_n));
        }
        // counts[k][s]: subsets of size k whose doubled ranks sum to s
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let total: usize = doubled.iter().sum();
        let mut counts = vec![vec![0u128; total + 1]; n + 1];
        counts[0][0] = 1;
        let mut reach = 0;
        for &r in &doubled {
            for k in (0..n).rev() {
                for s in (0..=reach).rev() {
                    let c = counts[k][s];
                    if c != 0 {
                        counts[k + 1][s + r] += c;
                    }
                }
            }
            reach += r;
        }
        let observed = (2.0 * r1).round() as usize;
        let all: u128 = counts[n].iter().sum();
        let below: u128 = counts[n][..=observed].iter().sum();
        let above: u128 = counts[n][observed..].iter().sum();
        result.p_less = below as f64 / all as f64;
        result.p_greater = above as f64 / all as f64;
    } else {
        if var <= 0.0 {
            return Err(AnalyticsError::DegenerateSample("zero variance under the null".into()));
        }
        let sd = var.sqrt();
        let normal = standard_normal();
        let diff = u - mean;
        let z = diff.signum() * (diff.abs() - 0.5).max(0.0) / sd;
        result.z = Some(z);
        result.p_greater = normal.sf((diff - 0.5) / sd);
        result.p_less = normal.cdf((diff + 0.5) / sd);
    }
    if result.z.is_none() && var > 0.0 {
        // reported alongside exact p-values for comparison with approximate runs
        let diff = u - mean;
        result.z = Some(diff.signum() * (diff.abs() - 0.5).max(0.0) / var.sqrt());
    }
    result.p = two_sided(result.p_less, result.p_greater);
    Ok(result)
}
