use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::AnalyticsError;
use crate::chronicle::ReqId;
use crate::trace::{EventType, Trace, TraceEvent};

/// Two renders on one slot closer than this count as a flashing update.
pub const DEFAULT_FLASH_WINDOW: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub completion_time: f64,
    pub accuracy: bool,
    pub concurrency_fraction: f64,
    pub out_of_order_count: usize,
    pub mismatch_count: usize,
    pub flashing_count: usize,
}

pub fn compute_metrics(trace: &Trace, flash_window: f64) -> Result<MetricReport, AnalyticsError> {
    Ok(MetricReport {
        completion_time: trace.completion_time().unwrap_or(0.0),
        accuracy: trace.submitted().and_then(|(_, c)| c).unwrap_or(false),
        concurrency_fraction: concurrency_fraction(trace),
        out_of_order_count: detect_out_of_order(trace).len(),
        mismatch_count: detect_mismatch(trace).len(),
        flashing_count: detect_flashing(trace, flash_window)?,
    })
}

fn session_bounds(trace: &Trace) -> Option<(f64, f64)> {
    let start = trace.start_time().or_else(|| trace.events.first().map(|e| e.t))?;
    let end = trace.end_time().or_else(|| trace.events.last().map(|e| e.t))?;
    Some((start, end))
}

/// Share of the task time with at least two requests in flight. A request
/// is in flight from its issue until its response arrives or it is
/// cancelled or evicted.
pub fn concurrency_fraction(trace: &Trace) -> f64 {
    let Some((start, end)) = session_bounds(trace) else {
        return 0.0;
    };
    let span = end - start;
    if span <= 0.0 {
        return 0.0;
    }
    let mut open: HashMap<ReqId, f64> = HashMap::new();
    let mut intervals = Vec::new();
    for e in &trace.events {
        let Some(id) = e.req_id else { continue };
        match e.kind {
            EventType::RequestIssued => {
                open.insert(id, e.t);
            }
            EventType::ResponseArrived | EventType::Cancelled | EventType::Evicted => {
                if let Some(s) = open.remove(&id) {
                    intervals.push((s, e.t));
                }
            }
            _ => {}
        }
    }
    intervals.extend(open.into_values().map(|s| (s, end)));

    // half-open intervals: at equal times closings go first
    let mut edges: Vec<(f64, i32)> = Vec::with_capacity(intervals.len() * 2);
    for (s, e) in intervals {
        let (s, e) = (s.max(start), e.min(end));
        if e > s {
            edges.push((s, 1));
            edges.push((e, -1));
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut depth = 0;
    let mut covered = 0.0;
    let mut last = start;
    for (t, delta) in edges {
        if depth >= 2 {
            covered += t - last;
        }
        depth += delta;
        last = t;
    }
    (covered / span).clamp(0.0, 1.0)
}

/// Pairs `(i, j)` where `i` was issued before `j` but `j`'s response arrived
/// first. Requests without a response are ignored.
pub fn detect_out_of_order(trace: &Trace) -> Vec<(ReqId, ReqId)> {
    let mut issue_rank: HashMap<ReqId, usize> = HashMap::new();
    let mut by_rank: Vec<ReqId> = Vec::new();
    let mut arrivals: Vec<ReqId> = Vec::new();
    let mut arrived: BTreeSet<ReqId> = BTreeSet::new();
    for e in &trace.events {
        let Some(id) = e.req_id else { continue };
        match e.kind {
            EventType::RequestIssued => {
                issue_rank.entry(id).or_insert_with(|| {
                    by_rank.push(id);
                    by_rank.len() - 1
                });
            }
            EventType::ResponseArrived if issue_rank.contains_key(&id) && arrived.insert(id) => {
                arrivals.push(id);
            }
            _ => {}
        }
    }
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    let mut pairs = Vec::new();
    for id in arrivals {
        let rank = issue_rank[&id];
        for later in seen.range(rank + 1..) {
            pairs.push((id, by_rank[*later]));
        }
        seen.insert(rank);
    }
    pairs.sort_unstable();
    pairs
}

fn renders_in_place(trace: &Trace) -> bool {
    match trace.config() {
        Some(config) => config.policy.is_in_place(),
        None => trace
            .of_kind(EventType::SpinnerOn)
            .all(|e| e.slot.unwrap_or(0) == 0),
    }
}

/// Renders showing an older request than the latest one issued at that
/// moment. Only meaningful for single-slot rendering; multi-slot traces
/// yield nothing.
pub fn detect_mismatch(trace: &Trace) -> Vec<TraceEvent> {
    if !renders_in_place(trace) {
        return Vec::new();
    }
    let mut latest: Option<ReqId> = None;
    let mut flagged = Vec::new();
    for e in &trace.events {
        match (e.kind, e.req_id) {
            (EventType::RequestIssued, Some(id)) => latest = Some(latest.map_or(id, |l| l.max(id))),
            (EventType::RenderApplied, Some(id)) if latest.is_some_and(|l| id != l) => flagged.push(e.clone()),
            _ => {}
        }
    }
    flagged
}

/// Ordered pairs of renders on the same slot less than `window` apart.
pub fn detect_flashing(trace: &Trace, window: f64) -> Result<usize, AnalyticsError> {
    if !(window > 0.0) {
        return Err(AnalyticsError::InvalidInput(format!("window must be positive, got {window}")));
    }
    let mut by_slot: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for e in trace.of_kind(EventType::RenderApplied) {
        by_slot.entry(e.slot.unwrap_or(0)).or_default().push(e.t);
    }
    let mut count = 0;
    for times in by_slot.values_mut() {
        times.sort_by(f64::total_cmp);
        let mut lo = 0;
        for hi in 0..times.len() {
            while times[hi] - times[lo] >= window {
                lo += 1;
            }
            count += hi - lo;
        }
    }
    Ok(count)
}
