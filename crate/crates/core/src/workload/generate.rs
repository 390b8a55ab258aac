use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{classify_trend, oracle_answer, summary, Answer, Assignment, FacetSeries, TaskKind, TaskSpec, TrendLabel, WorkloadError, SERIES_LEN};
use crate::chronicle::Point;

/// Values live on a 0..100 scale.
const SCALE: (f64, f64) = (0.0, 100.0);
/// Keeps sampled summaries strictly inside their bands despite rounding.
const INSET: f64 = 1e-6;
const NOISE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    /// Minimum distance between a summary and any decision boundary.
    pub margin: f64,
    /// Probability that a threshold assignment has a facet above the cutoff.
    pub positive_rate: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            margin: 10.0,
            positive_rate: 0.5,
        }
    }
}

/// Draws a facet series whose mean is `target` up to rounding.
fn series_with_mean<R: Rng + ?Sized>(rng: &mut R, target: f64) -> Vec<Point> {
    let noise: Vec<f64> = (0..SERIES_LEN).map(|_| rng.gen_range(-NOISE..NOISE)).collect();
    let offset = noise.iter().sum::<f64>() / SERIES_LEN as f64;
    noise
        .iter()
        .enumerate()
        .map(|(x, e)| Point::new(x as u32, target + e - offset))
        .collect()
}

fn band<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo + INSET..=hi - INSET)
}

pub fn generate_assignment<R: Rng + ?Sized>(
    task: &TaskSpec,
    rng: &mut R,
    params: GenerationParams,
) -> Result<Assignment, WorkloadError> {
    task.validate()?;
    if !(params.margin > 0.0) {
        return Err(WorkloadError::Generation(format!("margin must be positive, got {}", params.margin)));
    }
    if !(0.0..=1.0).contains(&params.positive_rate) {
        return Err(WorkloadError::Generation(format!(
            "positive_rate must lie in [0, 1], got {}",
            params.positive_rate
        )));
    }
    let n = task.facets.len();
    let (lo, hi) = SCALE;
    let margin = params.margin;

    let (summaries, truth) = match task.kind {
        TaskKind::Threshold { cutoff } => {
            let positive = rng.gen_bool(params.positive_rate);
            if cutoff - margin < lo + 2.0 * INSET {
                return Err(WorkloadError::Generation(format!(
                    "margin {margin} leaves no room below cutoff {cutoff}"
                )));
            }
            if positive && cutoff + margin > hi - 2.0 * INSET {
                return Err(WorkloadError::Generation(format!(
                    "margin {margin} leaves no room above cutoff {cutoff}"
                )));
            }
            let mut values: Vec<f64> = (0..n).map(|_| band(rng, lo, cutoff - margin)).collect();
            if positive {
                let which = rng.gen_range(0..n);
                values[which] = band(rng, cutoff + margin, hi);
            }
            (values, Answer::Exists(positive))
        }
        TaskKind::Maximum => {
            if margin >= (hi - lo) / 2.0 {
                return Err(WorkloadError::Generation(format!("margin {margin} too large for a unique maximum")));
            }
            let top = band(rng, (lo + hi) / 2.0 + margin / 2.0, hi);
            let which = rng.gen_range(0..n);
            let values: Vec<f64> = (0..n)
                .map(|i| if i == which { top } else { band(rng, lo, top - margin) })
                .collect();
            (values, Answer::Facet(task.facets[which].clone()))
        }
        TaskKind::Trend => {
            if n < 3 {
                return Err(WorkloadError::Generation(format!("a trend needs at least 3 facets, got {n}")));
            }
            let label = *[TrendLabel::Increasing, TrendLabel::Decreasing, TrendLabel::Fluctuating]
                .choose(rng)
                .expect("non-empty");
            let values: Vec<f64> = match label {
                TrendLabel::Increasing | TrendLabel::Decreasing => {
                    let base = rng.gen_range(10.0..20.0);
                    let step = rng.gen_range(40.0..70.0) / (n - 1) as f64;
                    let rising: Vec<f64> = (0..n)
                        .map(|i| base + step * i as f64 + rng.gen_range(-0.3..0.3) * step)
                        .collect();
                    if label == TrendLabel::Increasing {
                        rising
                    } else {
                        rising.into_iter().rev().collect()
                    }
                }
                TrendLabel::Fluctuating => {
                    let mid = rng.gen_range(40.0..60.0);
                    let amp = rng.gen_range(10.0..20.0);
                    (0..n)
                        .map(|i| {
                            let sign = if i % 2 == 0 { -1.0 } else { 1.0 };
                            mid + sign * amp + rng.gen_range(-0.3..0.3) * amp
                        })
                        .collect()
                }
            };
            (values, Answer::Trend(label))
        }
    };

    let data: Vec<FacetSeries> = task
        .facets
        .iter()
        .zip(&summaries)
        .map(|(target, v)| FacetSeries {
            target: target.clone(),
            series: series_with_mean(rng, *v),
        })
        .collect();
    let assignment = Assignment {
        task: task.clone(),
        data,
        ground_truth: truth,
    };
    debug_assert_eq!(
        oracle_answer(&assignment).ok().as_ref(),
        Some(&assignment.ground_truth),
        "generated summaries {:?}",
        assignment.data.iter().map(|f| summary(&f.series)).collect::<Vec<_>>()
    );
    if let TaskKind::Trend = task.kind {
        let recovered = Answer::Trend(classify_trend(&assignment.summaries()));
        if recovered != assignment.ground_truth {
            return Err(WorkloadError::Generation("trend label is ambiguous".into()));
        }
    }
    Ok(assignment)
}
