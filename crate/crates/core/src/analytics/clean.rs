use std::collections::HashMap;

use serde::Serialize;

use crate::trace::Trace;

/// Assignments slower than this are discarded.
pub const MAX_COMPLETION_SECS: f64 = 120.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantTrace {
    pub participant: String,
    pub trace: Trace,
}

impl ParticipantTrace {
    pub fn new(participant: impl Into<String>, trace: Trace) -> Self {
        Self {
            participant: participant.into(),
            trace,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CleanReport {
    /// Traces removed because their participant got most answers wrong.
    pub majority_wrong: usize,
    /// Traces slower than the completion limit.
    pub too_long: usize,
    /// Traces without any interaction.
    pub no_interaction: usize,
    pub kept: usize,
}

/// Applies the cleaning rules in order: participants with a majority of
/// wrong answers, then slow assignments, then assignments without requests.
/// Each removed trace is counted under the first rule that matches.
pub fn clean_traces(traces: Vec<ParticipantTrace>) -> (Vec<ParticipantTrace>, CleanReport) {
    let (keep, report) = clean_mask(&traces);
    let kept = traces.into_iter().zip(keep).filter(|(_, k)| *k).map(|(pt, _)| pt).collect();
    (kept, report)
}

/// Like [`clean_traces`], but reports which input positions survive.
pub fn clean_mask(traces: &[ParticipantTrace]) -> (Vec<bool>, CleanReport) {
    let mut tally: HashMap<&str, (usize, usize)> = HashMap::new();
    for pt in traces {
        if let Some((_, Some(correct))) = pt.trace.submitted() {
            let entry = tally.entry(pt.participant.as_str()).or_default();
            entry.0 += 1;
            if !correct {
                entry.1 += 1;
            }
        }
    }
    let unreliable: Vec<&str> = tally
        .into_iter()
        .filter(|(_, (answered, wrong))| 2 * wrong > *answered)
        .map(|(p, _)| p)
        .collect();

    let mut report = CleanReport::default();
    let keep = traces
        .iter()
        .map(|pt| {
            if unreliable.contains(&pt.participant.as_str()) {
                report.majority_wrong += 1;
            } else if pt.trace.completion_time().is_some_and(|c| c > MAX_COMPLETION_SECS) {
                report.too_long += 1;
            } else if pt.trace.request_count() == 0 {
                report.no_interaction += 1;
            } else {
                report.kept += 1;
                return true;
            }
            false
        })
        .collect();
    (keep, report)
}
