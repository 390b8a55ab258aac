//! Tasks, generated assignments with ground truth, and simulated users.

mod agent;
mod generate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chronicle::Point;

pub use agent::{Agent, AgentAction, AgentKind, AgentSpec, ScriptedStep};
pub use generate::{generate_assignment, GenerationParams};

pub const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

/// Points per facet series (one per year).
pub const SERIES_LEN: usize = 5;

pub fn months() -> Vec<String> {
    MONTHS.iter().map(|m| m.to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorkloadError {
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("cannot generate data: {0}")]
    Generation(String),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("invalid agent: {0}")]
    InvalidAgent(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskKind {
    /// Is any facet's value above `cutoff`?
    Threshold { cutoff: f64 },
    /// Which facet has the highest value?
    Maximum,
    /// Overall direction across the facets, in order.
    Trend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    #[serde(flatten)]
    pub kind: TaskKind,
    pub facets: Vec<String>,
}

impl TaskSpec {
    pub fn new(kind: TaskKind) -> Self {
        Self { kind, facets: months() }
    }

    pub fn threshold(cutoff: f64) -> Self {
        Self::new(TaskKind::Threshold { cutoff })
    }

    pub fn with_facets(mut self, facets: Vec<String>) -> Self {
        self.facets = facets;
        self
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.facets.is_empty() {
            return Err(WorkloadError::InvalidTask("no facets".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.facets.iter().find(|f| !seen.insert(f.as_str())) {
            return Err(WorkloadError::InvalidTask(format!("duplicate facet `{dup}`")));
        }
        if let TaskKind::Threshold { cutoff } = self.kind {
            if !cutoff.is_finite() {
                return Err(WorkloadError::InvalidTask(format!("cutoff {cutoff}")));
            }
        }
        Ok(())
    }

    pub fn has_facet(&self, target: &str) -> bool {
        self.facets.iter().any(|f| f == target)
    }

    /// Question shown to a participant.
    pub fn question(&self) -> String {
        let first = self.facets.first().map(String::as_str).unwrap_or("");
        let last = self.facets.last().map(String::as_str).unwrap_or("");
        match self.kind {
            TaskKind::Threshold { cutoff } => format!("Is there a month with a stock price above {cutoff}?"),
            TaskKind::Maximum => "Which month has the highest stock price?".to_string(),
            TaskKind::Trend => format!(
                "Is the stock price from {first} to {last} increasing, decreasing or fluctuating?"
            ),
        }
    }
}

impl fmt::Display for TaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TaskKind::Threshold { cutoff } => write!(f, "threshold:{cutoff}"),
            TaskKind::Maximum => write!(f, "maximum"),
            TaskKind::Trend => write!(f, "trend"),
        }
    }
}

impl FromStr for TaskSpec {
    type Err = WorkloadError;

    /// `threshold:CUTOFF`, `maximum` or `trend`, over the twelve months.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let kind = match s {
            "maximum" => TaskKind::Maximum,
            "trend" => TaskKind::Trend,
            _ => {
                let cutoff = s
                    .strip_prefix("threshold:")
                    .and_then(|c| c.trim().parse::<f64>().ok())
                    .ok_or_else(|| WorkloadError::InvalidTask(format!("unknown task `{s}`")))?;
                TaskKind::Threshold { cutoff }
            }
        };
        let task = TaskSpec::new(kind);
        task.validate()?;
        Ok(task)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendLabel {
    Increasing,
    Decreasing,
    Fluctuating,
}

/// A submitted or ground-truth answer. Serialized as a bare JSON value:
/// a boolean, a trend label, or a facet name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Answer {
    Exists(bool),
    Trend(TrendLabel),
    Facet(String),
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Answer::Exists(b) => write!(f, "{b}"),
            Answer::Trend(t) => write!(f, "{}", serde_json::to_value(t).expect("label").as_str().unwrap_or("")),
            Answer::Facet(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetSeries {
    pub target: String,
    pub series: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub task: TaskSpec,
    /// One series per facet, in facet order.
    pub data: Vec<FacetSeries>,
    pub ground_truth: Answer,
}

impl Assignment {
    pub fn series(&self, target: &str) -> Option<&[Point]> {
        self.data
            .iter()
            .find(|f| f.target == target)
            .map(|f| f.series.as_slice())
    }

    /// Per-facet summaries in facet order.
    pub fn summaries(&self) -> Vec<f64> {
        self.data.iter().map(|f| summary(&f.series)).collect()
    }
}

/// The scalar a task asks about: the mean of the facet's series.
pub fn summary(series: &[Point]) -> f64 {
    if series.is_empty() {
        return f64::NAN;
    }
    series.iter().map(|p| p.value).sum::<f64>() / series.len() as f64
}

/// Labels a sequence by the signs of its consecutive differences: at least
/// three quarters rising is increasing, three quarters falling is
/// decreasing, anything else fluctuating.
pub fn classify_trend(values: &[f64]) -> TrendLabel {
    let steps = values.len().saturating_sub(1);
    if steps == 0 {
        return TrendLabel::Fluctuating;
    }
    let (mut up, mut down) = (0usize, 0usize);
    for w in values.windows(2) {
        if w[1] > w[0] {
            up += 1;
        } else if w[1] < w[0] {
            down += 1;
        }
    }
    if 4 * up >= 3 * steps {
        TrendLabel::Increasing
    } else if 4 * down >= 3 * steps {
        TrendLabel::Decreasing
    } else {
        TrendLabel::Fluctuating
    }
}

/// Answer derived from the data alone.
pub fn oracle_answer(assignment: &Assignment) -> Result<Answer, WorkloadError> {
    let task = &assignment.task;
    if assignment.data.len() != task.facets.len()
        || task.facets.iter().any(|f| assignment.series(f).is_none())
    {
        return Err(WorkloadError::DegenerateData("data does not cover every facet".into()));
    }
    let values: Vec<f64> = task
        .facets
        .iter()
        .map(|f| summary(assignment.series(f).expect("checked")))
        .collect();
    Ok(match task.kind {
        TaskKind::Threshold { cutoff } => Answer::Exists(values.iter().any(|v| *v > cutoff)),
        TaskKind::Maximum => {
            let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let winners: Vec<usize> = (0..values.len()).filter(|i| values[*i] == best).collect();
            if winners.len() != 1 {
                return Err(WorkloadError::DegenerateData(format!(
                    "{} facets tie for the maximum",
                    winners.len()
                )));
            }
            Answer::Facet(task.facets[winners[0]].clone())
        }
        TaskKind::Trend => Answer::Trend(classify_trend(&values)),
    })
}
