use std::collections::VecDeque;

use super::SessionError;
use crate::chronicle::{ChronicleBuffer, InteractionRequest, Point, ResponsePayload};
use crate::trace::{EventType, Trace, TraceEvent};

/// The logged directive events of `trace`, in order.
pub fn directive_events(trace: &Trace) -> Vec<TraceEvent> {
    trace.events.iter().filter(|e| e.kind.is_directive()).cloned().collect()
}

fn describe(e: Option<&TraceEvent>) -> String {
    match e {
        Some(e) => serde_json::to_string(e).unwrap_or_else(|_| format!("{e:?}")),
        None => "nothing".to_string(),
    }
}

/// Re-feeds the logged requests and response arrivals through a fresh
/// buffer built from the logged config, returning the reconstructed
/// directive events. Fails at the first event where the log and the
/// reconstruction disagree.
pub fn replay(trace: &Trace) -> Result<Vec<TraceEvent>, SessionError> {
    let config = trace
        .config()
        .ok_or_else(|| SessionError::Config("trace has no session_start config".into()))?;
    let mut buffer = ChronicleBuffer::with_layout(config.policy.clone(), config.task.facets.clone())?;
    let mut produced: VecDeque<TraceEvent> = VecDeque::new();
    let mut history = Vec::new();
    let diverge = |index: usize, logged: Option<&TraceEvent>, replayed: Option<&TraceEvent>| SessionError::Divergence {
        index,
        logged: describe(logged),
        replayed: describe(replayed),
    };

    for (index, event) in trace.events.iter().enumerate() {
        if event.kind.is_directive() {
            if produced.is_empty() && event.kind == EventType::Released {
                let released = buffer.release_due(event.t)?;
                produced.extend(released.iter().map(TraceEvent::from_directive));
            }
            let next = produced.pop_front();
            if next.as_ref() != Some(event) {
                return Err(diverge(index, Some(event), next.as_ref()));
            }
            history.push(event.clone());
            continue;
        }
        if let Some(missing) = produced.front() {
            return Err(diverge(index, Some(event), Some(missing)));
        }
        let directives = match (event.kind, event.req_id) {
            (EventType::RequestIssued, Some(id)) => {
                let target = event.target.clone().unwrap_or_default();
                buffer.admit_request(InteractionRequest::new(id, target, event.t))?
            }
            // series are not logged; any non-empty placeholder will do
            (EventType::ResponseArrived, Some(id)) => {
                buffer.admit_response(ResponsePayload::new(id, vec![Point::new(0, 0.0)], event.t))?
            }
            _ => Vec::new(),
        };
        produced.extend(directives.iter().map(TraceEvent::from_directive));
    }
    if let Some(extra) = produced.front() {
        return Err(diverge(trace.events.len(), None, Some(extra)));
    }
    Ok(history)
}

/// Replays `trace` and checks that every logged directive was reproduced.
pub fn verify_replay(trace: &Trace) -> Result<usize, SessionError> {
    let history = replay(trace)?;
    Ok(history.len())
}
