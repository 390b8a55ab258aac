//! Simulated users. An agent sees only the screen snapshot and its own
//! memory of values it has read.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{classify_trend, summary, Answer, TaskKind, TaskSpec, TrendLabel, WorkloadError};
use crate::chronicle::Snapshot;

/// One step of a scripted agent: hover `target` at `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedStep {
    pub t: f64,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentKind {
    /// Waits for every response before the next hover.
    SelfSerializing,
    /// Hovers on a fixed cadence without waiting for responses.
    Eager,
    /// Replays recorded hovers, then submits a recorded answer.
    Scripted {
        steps: Vec<ScriptedStep>,
        submit: Option<(f64, Answer)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    #[serde(flatten)]
    pub kind: AgentKind,
    /// Seconds between decisions.
    pub think: f64,
    /// Facet values the agent can hold; `None` is unlimited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mem_size: Option<usize>,
    /// Trend shortcut: answer after this many same-sign differences from the
    /// first facet on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trend_early_exit: Option<usize>,
}

impl AgentSpec {
    pub fn serial(think: f64) -> Self {
        Self::with_kind(AgentKind::SelfSerializing, think)
    }

    pub fn eager(think: f64) -> Self {
        Self::with_kind(AgentKind::Eager, think)
    }

    pub fn scripted(steps: Vec<ScriptedStep>, submit: Option<(f64, Answer)>) -> Self {
        Self::with_kind(AgentKind::Scripted { steps, submit }, 0.0)
    }

    fn with_kind(kind: AgentKind, think: f64) -> Self {
        Self {
            kind,
            think,
            mem_size: None,
            trend_early_exit: None,
        }
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if !(self.think.is_finite() && self.think >= 0.0) {
            return Err(WorkloadError::InvalidAgent(format!("think must be >= 0, got {}", self.think)));
        }
        if self.mem_size == Some(0) {
            return Err(WorkloadError::InvalidAgent("mem_size must be at least 1".into()));
        }
        Ok(())
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            AgentKind::SelfSerializing => write!(f, "serial:{}", self.think),
            AgentKind::Eager => write!(f, "eager:{}", self.think),
            AgentKind::Scripted { steps, .. } => write!(f, "scripted[{}]", steps.len()),
        }
    }
}

impl FromStr for AgentSpec {
    type Err = WorkloadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, think) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| WorkloadError::InvalidAgent(format!("expected serial:THINK or eager:THINK, got `{s}`")))?;
        let think: f64 = think
            .parse()
            .map_err(|_| WorkloadError::InvalidAgent(format!("`{think}` is not a number")))?;
        let spec = match kind {
            "serial" => AgentSpec::serial(think),
            "eager" => AgentSpec::eager(think),
            other => return Err(WorkloadError::InvalidAgent(format!("unknown agent `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentAction {
    Hover(String),
    /// Nothing to do until `until`, or until the screen changes if `None`.
    Wait(Option<f64>),
    Submit(Answer),
}

#[derive(Debug, Clone)]
pub struct Agent {
    spec: AgentSpec,
    task: TaskSpec,
    /// Facet values read so far, least recently read first.
    memory: VecDeque<(String, f64)>,
    idle_since: Option<f64>,
    next_hover_at: Option<f64>,
    sweep: VecDeque<String>,
    script_pos: usize,
    hovers_since_progress: usize,
}

impl Agent {
    pub fn new(spec: AgentSpec, task: TaskSpec) -> Result<Self, WorkloadError> {
        spec.validate()?;
        task.validate()?;
        Ok(Self {
            spec,
            task,
            memory: VecDeque::new(),
            idle_since: None,
            next_hover_at: None,
            sweep: VecDeque::new(),
            script_pos: 0,
            hovers_since_progress: 0,
        })
    }

    pub fn spec(&self) -> &AgentSpec {
        &self.spec
    }

    /// Hovers issued since the agent last learned a new facet value.
    pub fn hovers_since_progress(&self) -> usize {
        self.hovers_since_progress
    }

    pub fn remembered(&self, target: &str) -> Option<f64> {
        self.memory.iter().find(|(t, _)| t == target).map(|(_, v)| *v)
    }

    pub fn decide(&mut self, view: &Snapshot, now: f64) -> AgentAction {
        self.read(view);
        if let AgentKind::Scripted { .. } = self.spec.kind {
            return self.decide_scripted(now);
        }
        if let Some(answer) = self.conclude() {
            return AgentAction::Submit(answer);
        }
        let action = match self.spec.kind {
            AgentKind::SelfSerializing => self.decide_serial(view, now),
            _ => self.decide_eager(view, now),
        };
        if let AgentAction::Hover(_) = action {
            self.hovers_since_progress += 1;
        }
        action
    }

    fn read(&mut self, view: &Snapshot) {
        for entry in view.rendered() {
            let Some(series) = &entry.series else { continue };
            let value = summary(series);
            let known = self.memory.iter().position(|(t, _)| *t == entry.target);
            match known {
                Some(pos) => {
                    self.memory.remove(pos);
                }
                None => self.hovers_since_progress = 0,
            }
            self.memory.push_back((entry.target.clone(), value));
            if let Some(cap) = self.spec.mem_size {
                while self.memory.len() > cap {
                    self.memory.pop_front();
                }
            }
        }
    }

    fn values_in_facet_order(&self) -> Option<Vec<f64>> {
        self.task.facets.iter().map(|f| self.remembered(f)).collect()
    }

    /// The answer, once the values read so far determine it.
    fn conclude(&self) -> Option<Answer> {
        match self.task.kind {
            TaskKind::Threshold { cutoff } => {
                if self.memory.iter().any(|(_, v)| *v > cutoff) {
                    return Some(Answer::Exists(true));
                }
                self.values_in_facet_order().map(|_| Answer::Exists(false))
            }
            TaskKind::Maximum => {
                let values = self.values_in_facet_order()?;
                let mut best = 0;
                for (i, v) in values.iter().enumerate() {
                    if *v > values[best] {
                        best = i;
                    }
                }
                Some(Answer::Facet(self.task.facets[best].clone()))
            }
            TaskKind::Trend => {
                if let Some(values) = self.values_in_facet_order() {
                    return Some(Answer::Trend(classify_trend(&values)));
                }
                let k = self.spec.trend_early_exit?;
                let prefix: Option<Vec<f64>> = self.task.facets.iter().take(k + 1).map(|f| self.remembered(f)).collect();
                let prefix = prefix.filter(|p| p.len() == k + 1)?;
                let diffs: Vec<f64> = prefix.windows(2).map(|w| w[1] - w[0]).collect();
                if diffs.iter().all(|d| *d > 0.0) {
                    Some(Answer::Trend(TrendLabel::Increasing))
                } else if diffs.iter().all(|d| *d < 0.0) {
                    Some(Answer::Trend(TrendLabel::Decreasing))
                } else {
                    None
                }
            }
        }
    }

    fn next_unread(&self) -> Option<String> {
        self.task
            .facets
            .iter()
            .find(|f| self.remembered(f).is_none())
            .cloned()
    }

    fn decide_serial(&mut self, view: &Snapshot, now: f64) -> AgentAction {
        if view.has_pending() {
            self.idle_since = None;
            return AgentAction::Wait(None);
        }
        let ready = *self.idle_since.get_or_insert(now) + self.spec.think;
        if now < ready {
            return AgentAction::Wait(Some(ready));
        }
        match self.next_unread() {
            Some(target) => {
                self.idle_since = None;
                AgentAction::Hover(target)
            }
            None => AgentAction::Wait(None),
        }
    }

    /// Sweeps every unread facet on a fixed cadence. A new sweep starts only
    /// once nothing is loading.
    fn decide_eager(&mut self, view: &Snapshot, now: f64) -> AgentAction {
        let outstanding = |target: &str| view.spinners.iter().any(|(_, t)| t == target);
        loop {
            if self.sweep.is_empty() {
                if view.has_pending() {
                    return AgentAction::Wait(None);
                }
                self.sweep = self
                    .task
                    .facets
                    .iter()
                    .filter(|f| self.remembered(f).is_none())
                    .cloned()
                    .collect();
                if self.sweep.is_empty() {
                    return AgentAction::Wait(None);
                }
                self.next_hover_at = Some(now + self.spec.think);
            }
            let due = self.next_hover_at.unwrap_or(now);
            if now < due {
                return AgentAction::Wait(Some(due));
            }
            while let Some(target) = self.sweep.pop_front() {
                if self.remembered(&target).is_none() && !outstanding(&target) {
                    self.next_hover_at = Some(now + self.spec.think);
                    return AgentAction::Hover(target);
                }
            }
        }
    }

    fn decide_scripted(&mut self, now: f64) -> AgentAction {
        let AgentKind::Scripted { steps, submit } = &self.spec.kind else {
            unreachable!("scripted agents only");
        };
        if let Some(step) = steps.get(self.script_pos) {
            if step.t <= now {
                self.script_pos += 1;
                return AgentAction::Hover(step.target.clone());
            }
            return AgentAction::Wait(Some(step.t));
        }
        match submit {
            Some((t, answer)) if *t <= now => AgentAction::Submit(answer.clone()),
            Some((t, _)) => AgentAction::Wait(Some(*t)),
            None => AgentAction::Wait(None),
        }
    }
}
