use std::path::Path;
use std::time::{Duration, Instant};

use super::engine::{Due, Engine};
use super::{Pace, SessionConfig, SessionError, SessionSummary};
use crate::analytics::{compute_metrics, DEFAULT_FLASH_WINDOW};
use crate::latency::LatencyProfile;
use crate::trace::{persist_trace, EventType, Trace};
use crate::workload::{Agent, AgentAction, AgentSpec, Answer, ScriptedStep};

/// Upper bound on processed events before a simulation is declared stuck.
pub const MAX_EVENTS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub summary: SessionSummary,
    pub trace: Trace,
}

/// Runs an agent-driven session to its answer.
pub fn run_simulation(config: &SessionConfig) -> Result<SimulationOutput, SessionError> {
    let spec = config
        .agent
        .clone()
        .ok_or_else(|| SessionError::Config("simulation needs an agent".into()))?;
    let mut engine = Engine::new(config.clone())?;
    let mut agent = Agent::new(spec, config.task.clone())?;
    let facets = config.task.facets.len();
    let wall_start = Instant::now();
    let mut wake_at: Option<f64> = None;
    let mut now = 0.0;
    let mut processed = 0usize;

    let (answer, correct) = 'session: loop {
        loop {
            match agent.decide(&engine.snapshot(), now) {
                AgentAction::Hover(target) => {
                    engine.interact(&target, now)?;
                    if agent.hovers_since_progress() > 2 * facets {
                        return Err(SessionError::Stuck {
                            t: now,
                            detail: format!("{} hovers without reading a new value", agent.hovers_since_progress()),
                        });
                    }
                }
                AgentAction::Wait(Some(t)) => {
                    if wake_at != Some(t) {
                        engine.schedule_wake(t)?;
                        wake_at = Some(t);
                    }
                    break;
                }
                AgentAction::Wait(None) => break,
                AgentAction::Submit(answer) => {
                    let correct = engine.submit(answer.clone(), now)?;
                    break 'session (answer, correct);
                }
            }
        }
        processed += 1;
        if processed > MAX_EVENTS {
            return Err(SessionError::Stuck {
                t: now,
                detail: format!("no answer after {MAX_EVENTS} events"),
            });
        }
        let Some((event, _)) = engine.step()? else {
            return Err(SessionError::Stuck {
                t: now,
                detail: "agent is waiting with nothing in flight".into(),
            });
        };
        now = event.due_at;
        if event.payload == Due::AgentWake && wake_at == Some(now) {
            wake_at = None;
        }
        // the agent acts on the screen as settled at `now`
        while let Some((event, _)) = engine.step_until(now)? {
            if event.payload == Due::AgentWake && wake_at == Some(now) {
                wake_at = None;
            }
        }
        if config.pace == Pace::Realtime {
            let target = Duration::from_secs_f64(now);
            if let Some(rest) = target.checked_sub(wall_start.elapsed()) {
                std::thread::sleep(rest);
            }
        }
    };

    let trace = engine.into_trace();
    let metrics = compute_metrics(&trace, DEFAULT_FLASH_WINDOW)?;
    Ok(SimulationOutput {
        summary: SessionSummary {
            config: config.clone(),
            metrics,
            answer: Some(answer),
            correct: Some(correct),
            trace_path: None,
        },
        trace,
    })
}

/// Runs a simulation and persists its trace at `path`.
pub fn run_simulation_to(config: &SessionConfig, path: impl AsRef<Path>) -> Result<SimulationOutput, SessionError> {
    let mut out = run_simulation(config)?;
    persist_trace(&out.trace, path.as_ref())?;
    out.summary.trace_path = Some(path.as_ref().to_path_buf());
    Ok(out)
}

/// Headless re-run of a recorded live session: its hovers become a scripted
/// agent and its observed delays a `Trace` latency profile.
pub fn parity_config(trace: &Trace) -> Result<SessionConfig, SessionError> {
    let mut config = trace
        .config()
        .cloned()
        .ok_or_else(|| SessionError::Config("trace has no session_start config".into()))?;
    let end = trace.end_time().unwrap_or_else(|| trace.events.last().map_or(0.0, |e| e.t));
    let mut steps = Vec::new();
    let mut samples = Vec::new();
    for e in trace.of_kind(EventType::RequestIssued) {
        let (Some(id), Some(target)) = (e.req_id, e.target.clone()) else {
            continue;
        };
        let arrived = trace
            .of_kind(EventType::ResponseArrived)
            .find(|a| a.req_id == Some(id))
            .map(|a| a.t);
        // responses still in flight at the end land after it
        samples.push(arrived.map_or(end - e.t + 1.0, |a| delay_between(e.t, a)));
        steps.push(ScriptedStep { t: e.t, target });
    }
    let submit: Option<(f64, Answer)> = trace.submitted().map(|(a, _)| (trace.end_time().unwrap_or(end), a.clone()));
    config.latency = LatencyProfile::Trace { samples };
    config.agent = Some(AgentSpec::scripted(steps, submit));
    config.pace = Pace::Virtual;
    Ok(config)
}

/// A delay `d` with `issued + d == arrived` in floating point, so re-runs
/// reproduce logged arrival times bit for bit.
fn delay_between(issued: f64, arrived: f64) -> f64 {
    let guess = arrived - issued;
    let mut d = guess;
    for _ in 0..8 {
        let sum = issued + d;
        if sum == arrived {
            return d;
        }
        d = if sum < arrived { d.next_up() } else { d.next_down() };
    }
    guess
}
