use serde::{Deserialize, Serialize};

use crate::analytics::AnalyticsError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolmOutcome {
    /// Rejection flag per hypothesis, in input order.
    pub reject: Vec<bool>,
    /// `alpha / (m - j + 1)` for rank `j = 1..=m` (ascending p).
    pub thresholds: Vec<f64>,
    /// Input indices sorted by ascending p.
    pub order: Vec<usize>,
}

/// Holm's step-down procedure.
pub fn holm_bonferroni(pvals: &[f64], alpha: f64) -> Result<HolmOutcome, AnalyticsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(AnalyticsError::InvalidInput(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if let Some(p) = pvals.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(AnalyticsError::InvalidInput(format!("p-value {p} outside [0, 1]")));
    }
    let m = pvals.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|a, b| pvals[*a].total_cmp(&pvals[*b]));
    let thresholds: Vec<f64> = (0..m).map(|j| alpha / (m - j) as f64).collect();
    let mut reject = vec![false; m];
    for (rank, &idx) in order.iter().enumerate() {
        if pvals[idx] > thresholds[rank] {
            break;
        }
        reject[idx] = true;
    }
    Ok(HolmOutcome {
        reject,
        thresholds,
        order,
    })
}
