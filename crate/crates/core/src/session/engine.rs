use std::collections::BTreeMap;

use super::{SessionConfig, SessionError};
use crate::chronicle::{ChronicleBuffer, InteractionRequest, RenderDirective, ReqId, ResponsePayload, Snapshot};
use crate::latency::{session_rng, LatencySampler, DATA_STREAM, LATENCY_STREAM};
use crate::scheduler::{ScheduledEvent, Scheduler};
use crate::trace::{EventType, Trace, TraceEvent};
use crate::workload::{generate_assignment, Answer, Assignment};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Due {
    Response(ReqId),
    ReleaseTick,
    AgentWake,
}

/// One session's state: buffer, data, latency draws, pending deliveries and
/// the trace. Simulations and live sessions drive the same engine, so a
/// recorded live session re-runs identically.
#[derive(Debug)]
pub(crate) struct Engine {
    config: SessionConfig,
    assignment: Assignment,
    buffer: ChronicleBuffer,
    sampler: LatencySampler,
    queue: Scheduler<Due>,
    trace: Trace,
    targets: BTreeMap<ReqId, String>,
    next_id: ReqId,
    release_at: Option<f64>,
    finished: bool,
}

impl Engine {
    pub fn new(config: SessionConfig) -> Result<Self, SessionError> {
        config.validate()?;
        let mut data_rng = session_rng(config.seed, DATA_STREAM);
        let assignment = generate_assignment(&config.task, &mut data_rng, config.generation)?;
        let buffer = ChronicleBuffer::with_layout(config.policy.clone(), config.task.facets.clone())?;
        let sampler = LatencySampler::new(config.latency.clone(), session_rng(config.seed, LATENCY_STREAM));
        let mut trace = Trace::default();
        trace.push(TraceEvent::session_start(0.0, config.clone()));
        Ok(Self {
            config,
            assignment,
            buffer,
            sampler,
            queue: Scheduler::new(),
            trace,
            targets: BTreeMap::new(),
            next_id: 1,
            release_at: None,
            finished: false,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }

    pub fn snapshot(&self) -> Snapshot {
        self.buffer.snapshot()
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn now(&self) -> f64 {
        self.queue.now()
    }

    pub fn next_due(&self) -> Option<f64> {
        self.queue.peek_due()
    }

    pub fn schedule_wake(&mut self, at: f64) -> Result<(), SessionError> {
        self.queue.schedule(Due::AgentWake, at)?;
        Ok(())
    }

    /// Issues a hover on `target` at `t`, which must not precede any event
    /// already processed.
    pub fn interact(&mut self, target: &str, t: f64) -> Result<Vec<RenderDirective>, SessionError> {
        if !self.config.task.has_facet(target) {
            return Err(SessionError::Config(format!("unknown facet `{target}`")));
        }
        if !(t >= self.queue.now()) {
            return Err(SessionError::Config(format!(
                "interaction at {t} precedes session time {}",
                self.queue.now()
            )));
        }
        let req_id = self.next_id;
        self.next_id += 1;
        self.trace
            .push(TraceEvent::request(t, EventType::RequestIssued, req_id, target));
        self.targets.insert(req_id, target.to_string());
        let directives = self.buffer.admit_request(InteractionRequest::new(req_id, target, t))?;
        self.log(&directives);
        let latency = self.sampler.sample()?;
        self.queue.schedule(Due::Response(req_id), t + latency)?;
        self.schedule_release()?;
        Ok(directives)
    }

    /// Pops the next pending event if it is due by `until`, applying it.
    pub fn step_until(&mut self, until: f64) -> Result<Option<(ScheduledEvent<Due>, Vec<RenderDirective>)>, SessionError> {
        match self.queue.advance_until(until) {
            Some(event) => {
                let directives = self.apply(&event)?;
                Ok(Some((event, directives)))
            }
            None => Ok(None),
        }
    }

    /// Pops and applies the next pending event, whenever it is due.
    pub fn step(&mut self) -> Result<Option<(ScheduledEvent<Due>, Vec<RenderDirective>)>, SessionError> {
        if self.queue.is_empty() {
            return Ok(None);
        }
        let event = self.queue.advance()?;
        let directives = self.apply(&event)?;
        Ok(Some((event, directives)))
    }

    fn apply(&mut self, event: &ScheduledEvent<Due>) -> Result<Vec<RenderDirective>, SessionError> {
        let t = event.due_at;
        let directives = match event.payload {
            Due::Response(req_id) => {
                let target = self.targets[&req_id].clone();
                self.trace
                    .push(TraceEvent::request(t, EventType::ResponseArrived, req_id, &target));
                let series = self
                    .assignment
                    .series(&target)
                    .map(<[_]>::to_vec)
                    .ok_or_else(|| SessionError::Config(format!("no data for facet `{target}`")))?;
                let directives = self.buffer.admit_response(ResponsePayload::new(req_id, series, t))?;
                if directives.is_empty() {
                    self.trace
                        .push(TraceEvent::request(t, EventType::DroppedResponse, req_id, &target));
                }
                directives
            }
            Due::ReleaseTick => {
                if self.release_at == Some(t) {
                    self.release_at = None;
                }
                self.buffer.release_due(t)?
            }
            Due::AgentWake => Vec::new(),
        };
        self.log(&directives);
        self.schedule_release()?;
        Ok(directives)
    }

    fn schedule_release(&mut self) -> Result<(), SessionError> {
        if let Some(at) = self.buffer.next_release_at() {
            let at = at.max(self.queue.now());
            if self.release_at != Some(at) {
                self.queue.schedule(Due::ReleaseTick, at)?;
                self.release_at = Some(at);
            }
        }
        Ok(())
    }

    fn log(&mut self, directives: &[RenderDirective]) {
        for d in directives {
            self.trace.push(TraceEvent::from_directive(d));
        }
    }

    /// Grades `answer`, closes the trace and returns whether it was correct.
    pub fn submit(&mut self, answer: Answer, t: f64) -> Result<bool, SessionError> {
        if self.finished {
            return Err(SessionError::Config("answer already submitted".into()));
        }
        let correct = answer == self.assignment.ground_truth;
        self.trace.push(TraceEvent::answer(t, answer, correct));
        self.trace.push(TraceEvent::new(t, EventType::SessionEnd));
        self.finished = true;
        Ok(correct)
    }
}
