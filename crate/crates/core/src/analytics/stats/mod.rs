//! Nonparametric test battery plus the descriptive statistics used in
//! reports.

mod correlation;
mod holm;
mod median;
mod wilcoxon;

use serde::{Deserialize, Serialize};

pub use correlation::pearson_r;
pub use holm::{holm_bonferroni, HolmOutcome};
pub use median::{median, median_ci, MedianCi};
pub use wilcoxon::{hodges_lehmann, wilcoxon_one_sample, wilcoxon_rank_sum, wilcoxon_signed_rank};

use super::AnalyticsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TestMode {
    Exact,
    Approx,
    /// Exact when the sample is small enough, normal approximation otherwise.
    #[default]
    Auto,
}

impl std::str::FromStr for TestMode {
    type Err = AnalyticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(TestMode::Exact),
            "approx" => Ok(TestMode::Approx),
            "auto" => Ok(TestMode::Auto),
            other => Err(AnalyticsError::InvalidInput(format!("unknown test mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisTestResult {
    pub method: String,
    /// W+ for signed-rank tests, U of the first sample for rank-sum.
    pub statistic: f64,
    /// Normal score; present for approximate tests.
    pub z: Option<f64>,
    pub exact: bool,
    /// Two-sided p-value.
    pub p: f64,
    /// One-sided p-value for a shift below the null.
    pub p_less: f64,
    /// One-sided p-value for a shift above the null.
    pub p_greater: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<f64>,
}

/// Average (mid) ranks starting at 1, and the sizes of tie groups.
pub fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share the mean of ranks i+1..=j+1
        let rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

/// Σ(t³ − t) over tie groups.
fn tie_term(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum()
}

fn two_sided(p_less: f64, p_greater: f64) -> f64 {
    (2.0 * p_less.min(p_greater)).min(1.0)
}

fn standard_normal() -> statrs::distribution::Normal {
    statrs::distribution::Normal::new(0.0, 1.0).expect("valid parameters")
}
