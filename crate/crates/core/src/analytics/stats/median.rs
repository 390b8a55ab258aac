use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::analytics::AnalyticsError;

pub fn median(sample: &[f64]) -> Result<f64, AnalyticsError> {
    if sample.is_empty() {
        return Err(AnalyticsError::DegenerateSample("empty sample".into()));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    Ok(if n % 2 == 0 {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    } else {
        s[n / 2]
    })
}

/// Median with a distribution-free order-statistic interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianCi {
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
    /// Interval is `(x_(k), x_(n-k+1))`, 1-based.
    pub k: usize,
    /// Probability that the interval covers the population median.
    pub coverage: f64,
    /// False when the sample is too small to reach the requested level and
    /// the full range is returned instead.
    pub level_met: bool,
}

/// P(B <= k) for B ~ Binomial(n, 1/2).
fn binomial_half_cdf(n: usize, k: usize) -> f64 {
    let ln_half_n = n as f64 * std::f64::consts::LN_2;
    (0..=k.min(n))
        .map(|i| (ln_binomial(n as u64, i as u64) - ln_half_n).exp())
        .sum::<f64>()
        .min(1.0)
}

pub fn median_ci(sample: &[f64], level: f64) -> Result<MedianCi, AnalyticsError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(AnalyticsError::InvalidInput(format!("level must lie in (0, 1), got {level}")));
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let med = median(&s)?;
    let n = s.len();
    let mut best = None;
    for k in 1..=(n + 1) / 2 {
        let outside = 2.0 * binomial_half_cdf(n, k - 1);
        if outside <= 1.0 - level {
            best = Some((k, 1.0 - outside));
        } else {
            break;
        }
    }
    Ok(match best {
        Some((k, coverage)) => MedianCi {
            median: med,
            lo: s[k - 1],
            hi: s[n - k],
            k,
            coverage,
            level_met: true,
        },
        None => MedianCi {
            median: med,
            lo: s[0],
            hi: s[n - 1],
            k: 1,
            coverage: 1.0 - 2.0 * binomial_half_cdf(n, 0),
            level_met: false,
        },
    })
}
