//! Sessions: headless agent-driven simulations, live sessions over the wire
//! protocol, and trace replay.

mod engine;
mod live;
mod protocol;
mod replay;
mod sim;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{AnalyticsError, MetricReport};
use crate::chronicle::{ChronicleError, PolicySpec};
use crate::latency::{LatencyError, LatencyProfile};
use crate::scheduler::SchedulerError;
use crate::trace::TraceError;
use crate::workload::{AgentSpec, Answer, GenerationParams, TaskSpec, WorkloadError};

pub use live::LiveSession;
pub use protocol::{ClientMessage, ServerMessage};
pub use replay::{directive_events, replay, verify_replay};
pub use sim::{parity_config, run_simulation, run_simulation_to, SimulationOutput, MAX_EVENTS};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session config: {0}")]
    Config(String),
    #[error(transparent)]
    Chronicle(#[from] ChronicleError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Latency(#[from] LatencyError),
    #[error(transparent)]
    Scheduler(#[from] SchedulerError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("session stuck at t={t}: {detail}")]
    Stuck { t: f64, detail: String },
    #[error("replay diverges at event {index}: logged {logged}, replayed {replayed}")]
    Divergence {
        index: usize,
        logged: String,
        replayed: String,
    },
}

impl SessionError {
    /// Stable identifier for machine-readable error reports.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::Config(_) => "config",
            SessionError::Chronicle(_) => "chronicle",
            SessionError::Workload(_) => "workload",
            SessionError::Latency(_) => "latency",
            SessionError::Scheduler(_) => "scheduler",
            SessionError::Trace(_) => "trace",
            SessionError::Analytics(_) => "analytics",
            SessionError::Stuck { .. } => "stuck_session",
            SessionError::Divergence { .. } => "replay_divergence",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pace {
    /// Idle time is skipped.
    #[default]
    Virtual,
    /// One virtual second per wall-clock second.
    Realtime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub policy: PolicySpec,
    pub latency: LatencyProfile,
    pub task: TaskSpec,
    /// Simulated user; absent for live sessions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentSpec>,
    pub seed: u64,
    #[serde(default)]
    pub pace: Pace,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant: Option<String>,
    #[serde(default)]
    pub generation: GenerationParams,
}

impl SessionConfig {
    pub fn new(policy: PolicySpec, latency: LatencyProfile, task: TaskSpec, seed: u64) -> Self {
        Self {
            policy,
            latency,
            task,
            agent: None,
            seed,
            pace: Pace::Virtual,
            participant: None,
            generation: GenerationParams::default(),
        }
    }

    pub fn with_agent(mut self, agent: AgentSpec) -> Self {
        self.agent = Some(agent);
        self
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        self.policy.validate()?;
        self.latency.validate()?;
        self.task.validate()?;
        if let Some(agent) = &self.agent {
            agent.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub config: SessionConfig,
    pub metrics: MetricReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<Answer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<PathBuf>,
}
