//! Generators and reference oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use chronicle::chronicle::{
    ChronicleBuffer, DirectiveKind, EncodingToken, EntryState, InteractionRequest, Point, PolicySpec, RenderDirective,
    ReqId, ResponsePayload, Scheme, Snapshot,
};
use chronicle::trace::{EventType, Trace, TraceEvent};
use rand::Rng;

pub const TARGETS: [&str; 5] = ["Jan", "Feb", "Mar", "Apr", "May"];

pub fn policies() -> Vec<PolicySpec> {
    [
        "blocking",
        "naive",
        "cumulative",
        "multiples:1",
        "multiples:3",
        "multiples:4:categorical",
        "overlay:2:ordinal",
        "overlay:4:categorical",
        "animation:1",
        "animation:0",
        "animation:0.5:unordered",
    ]
    .iter()
    .map(|p| p.parse().expect("valid policy"))
    .collect()
}

/// One step of a buffer workload. `dt` advances the clock first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    Request { target: usize, dt: f64 },
    /// Answers the `pick`-th (mod count) request still awaiting a response.
    Respond { pick: usize, dt: f64 },
    Tick { dt: f64 },
}

/// Quarter-second steps make simultaneous events and dwell boundaries common.
pub fn random_dt<R: Rng>(rng: &mut R) -> f64 {
    match rng.gen_range(0..4) {
        0 => 0.0,
        1 => rng.gen_range(1..=8) as f64 * 0.25,
        _ => rng.gen_range(0.0..2.0),
    }
}

pub fn random_op<R: Rng>(rng: &mut R) -> Op {
    let dt = random_dt(rng);
    match rng.gen_range(0..10) {
        0..=4 => Op::Request {
            target: rng.gen_range(0..TARGETS.len()),
            dt,
        },
        5..=8 => Op::Respond {
            pick: rng.gen_range(0..16),
            dt,
        },
        _ => Op::Tick { dt },
    }
}

pub fn random_ops<R: Rng>(rng: &mut R, len: usize) -> Vec<Op> {
    (0..len).map(|_| random_op(rng)).collect()
}

pub fn series_for(id: ReqId) -> Vec<Point> {
    vec![Point::new(0, id as f64)]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub slot: usize,
    pub target: String,
    pub state: EntryState,
    pub encoding: EncodingToken,
    pub series: Option<Vec<Point>>,
}

/// The screen as a client rebuilds it from directives alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ViewModel {
    pub cells: BTreeMap<ReqId, Cell>,
    pub spinners: BTreeMap<ReqId, String>,
}

impl ViewModel {
    /// Applies one directive. Returns how many other cells it displaced
    /// without an explicit eviction.
    pub fn apply(&mut self, d: &RenderDirective) -> usize {
        match d.kind {
            DirectiveKind::SpinnerOn => {
                let displaced = self.vacate(d.slot, d.req_id);
                self.cells.insert(
                    d.req_id,
                    Cell {
                        slot: d.slot,
                        target: d.target.clone(),
                        state: EntryState::Pending,
                        encoding: d.encoding.expect("spinner carries its encoding"),
                        series: None,
                    },
                );
                self.spinners.insert(d.req_id, d.target.clone());
                displaced
            }
            DirectiveKind::RenderResponse | DirectiveKind::ReplaceInPlace => {
                let displaced = self.vacate(d.slot, d.req_id);
                self.cells.insert(
                    d.req_id,
                    Cell {
                        slot: d.slot,
                        target: d.target.clone(),
                        state: EntryState::Rendered,
                        encoding: d.encoding.expect("render carries its encoding"),
                        series: d.series.clone(),
                    },
                );
                displaced
            }
            DirectiveKind::SpinnerOff => {
                self.spinners.remove(&d.req_id);
                0
            }
            DirectiveKind::Evict | DirectiveKind::Cancel => {
                self.cells.remove(&d.req_id);
                self.spinners.remove(&d.req_id);
                0
            }
            DirectiveKind::Recolor => {
                if let Some(cell) = self.cells.get_mut(&d.req_id) {
                    cell.encoding = d.encoding.expect("recolor carries its encoding");
                }
                0
            }
            DirectiveKind::Hold | DirectiveKind::Release => 0,
        }
    }

    fn vacate(&mut self, slot: usize, keep: ReqId) -> usize {
        let gone: Vec<ReqId> = self
            .cells
            .iter()
            .filter(|(id, c)| c.slot == slot && **id != keep)
            .map(|(id, _)| *id)
            .collect();
        for id in &gone {
            self.cells.remove(id);
        }
        gone.len()
    }

    pub fn matches(&self, snapshot: &Snapshot) -> Result<(), String> {
        let cells: BTreeMap<ReqId, Cell> = snapshot
            .entries
            .iter()
            .map(|e| {
                (
                    e.req_id,
                    Cell {
                        slot: e.slot,
                        target: e.target.clone(),
                        state: e.state,
                        encoding: e.encoding,
                        series: e.series.clone(),
                    },
                )
            })
            .collect();
        let spinners: BTreeMap<ReqId, String> = snapshot.spinners.iter().cloned().collect();
        if cells != self.cells {
            return Err(format!("entries differ: view {:?} vs buffer {:?}", self.cells, cells));
        }
        if spinners != self.spinners {
            return Err(format!("spinners differ: view {:?} vs buffer {:?}", self.spinners, spinners));
        }
        Ok(())
    }
}

/// Directive stream produced by one workload, and what it exercised.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub directives: Vec<RenderDirective>,
    pub evictions: usize,
    pub renders: usize,
}

fn is_fifo_multi(policy: &PolicySpec) -> bool {
    matches!(policy, PolicySpec::SmallMultiples { .. } | PolicySpec::Overlay { .. })
}

/// Drives a buffer through `ops`, checking after every step that the
/// directive-built view equals the buffer snapshot and that the safety
/// properties hold.
pub fn check_ops(policy: &PolicySpec, ops: &[Op]) -> Result<Outcome, String> {
    let layout: Vec<String> = TARGETS.iter().map(|t| t.to_string()).collect();
    let mut buffer = ChronicleBuffer::with_layout(policy.clone(), layout).map_err(|e| e.to_string())?;
    let capacity = buffer.capacity();
    let mut view = ViewModel::default();
    let mut outcome = Outcome::default();
    let mut now = 0.0;
    let mut next_id: ReqId = 1;
    let mut awaiting: Vec<ReqId> = Vec::new();
    let mut gone: BTreeSet<ReqId> = BTreeSet::new();
    let mut last_release: Option<(f64, ReqId)> = None;

    for (step, op) in ops.iter().enumerate() {
        let ctx = |msg: String| format!("{policy} step {step} ({op:?}): {msg}");
        let (directives, answered) = match *op {
            Op::Request { target, dt } => {
                now += dt;
                let id = next_id;
                next_id += 1;
                awaiting.push(id);
                let out = buffer
                    .admit_request(InteractionRequest::new(id, TARGETS[target], now))
                    .map_err(|e| ctx(e.to_string()))?;
                (out, None)
            }
            Op::Respond { pick, dt } if !awaiting.is_empty() => {
                now += dt;
                let id = awaiting.remove(pick % awaiting.len());
                let out = buffer
                    .admit_response(ResponsePayload::new(id, series_for(id), now))
                    .map_err(|e| ctx(e.to_string()))?;
                (out, Some(id))
            }
            Op::Respond { dt, .. } | Op::Tick { dt } => {
                now += dt;
                (buffer.release_due(now).map_err(|e| ctx(e.to_string()))?, None)
            }
        };

        if let Some(id) = answered {
            if gone.contains(&id) && !directives.is_empty() {
                return Err(ctx(format!("response of removed request {id} produced {directives:?}")));
            }
        }
        for d in &directives {
            if d.at != now {
                return Err(ctx(format!("directive stamped {} at time {now}", d.at)));
            }
            if gone.contains(&d.req_id) {
                return Err(ctx(format!("removed request {} resurfaced in {:?}", d.req_id, d.kind)));
            }
            match d.kind {
                DirectiveKind::Evict => {
                    if !view.cells.contains_key(&d.req_id) {
                        return Err(ctx(format!("evicted {} is not on screen", d.req_id)));
                    }
                    if is_fifo_multi(policy) {
                        let oldest = *view.cells.keys().next().expect("non-empty");
                        if d.req_id != oldest {
                            return Err(ctx(format!("evicted {} while {oldest} is older", d.req_id)));
                        }
                    }
                    gone.insert(d.req_id);
                    outcome.evictions += 1;
                }
                DirectiveKind::Cancel => {
                    if *policy != PolicySpec::Blocking {
                        return Err(ctx("cancel outside blocking".into()));
                    }
                    gone.insert(d.req_id);
                }
                DirectiveKind::RenderResponse | DirectiveKind::ReplaceInPlace => {
                    if d.series.as_deref() != Some(series_for(d.req_id).as_slice()) {
                        return Err(ctx(format!("render of {} carries the wrong series", d.req_id)));
                    }
                    if *policy == PolicySpec::Blocking && d.req_id != next_id - 1 {
                        return Err(ctx(format!("rendered {} superseded by {}", d.req_id, next_id - 1)));
                    }
                    outcome.renders += 1;
                }
                DirectiveKind::Release => {
                    if let PolicySpec::Animation { min_dwell, in_order } = policy {
                        if let Some((t, prev)) = last_release {
                            if now < t + min_dwell {
                                return Err(ctx(format!("release {} only {} s after the last", d.req_id, now - t)));
                            }
                            if *in_order && d.req_id <= prev {
                                return Err(ctx(format!("released {} after {prev}", d.req_id)));
                            }
                        }
                        last_release = Some((now, d.req_id));
                    }
                }
                _ => {}
            }
            let displaced = view.apply(d);
            if displaced > 0 && !policy.is_in_place() {
                return Err(ctx(format!("{:?} of {} overwrote a live slot", d.kind, d.req_id)));
            }
        }
        outcome.directives.extend(directives);

        let snapshot = buffer.snapshot();
        view.matches(&snapshot).map_err(ctx)?;
        if snapshot.entries.len() > capacity {
            return Err(ctx(format!("{} entries exceed capacity {capacity}", snapshot.entries.len())));
        }
        if let Some(id) = snapshot.entries.iter().map(|e| e.req_id).find(|id| gone.contains(id)) {
            return Err(ctx(format!("removed request {id} still on screen")));
        }
        if policy.scheme() == Scheme::Ordinal {
            check_ordinal_ranks(&snapshot).map_err(ctx)?;
        }
    }
    Ok(outcome)
}

/// Ordinal levels of the live entries are exactly 0..n, newest first.
pub fn check_ordinal_ranks(snapshot: &Snapshot) -> Result<(), String> {
    let mut by_recency: Vec<(ReqId, u32)> = snapshot.entries.iter().map(|e| (e.req_id, e.encoding.level)).collect();
    by_recency.sort_by(|a, b| b.0.cmp(&a.0));
    for (rank, (id, level)) in by_recency.iter().enumerate() {
        if *level as usize != rank {
            return Err(format!("request {id} has level {level}, expected {rank}: {by_recency:?}"));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// synthetic traces

/// A request in a synthetic trace, times in whole milliseconds.
#[derive(Debug, Clone, Copy)]
pub struct Staged {
    pub issue: u32,
    pub close: Option<(u32, EventType)>,
}

/// Builds a trace from staged requests. Ties are broken by `tiebreak` so
/// event order at equal times is arbitrary but a request's own issue always
/// comes first.
pub fn staged_trace(staged: &[Staged], end: u32, tiebreak: &[u32]) -> Trace {
    let ms = |t: u32| t as f64 / 1000.0;
    let mut order: Vec<usize> = (0..staged.len()).collect();
    order.sort_by_key(|i| (staged[*i].issue, tiebreak.get(*i).copied().unwrap_or(0), *i));
    // (time, phase, key, event): issues sort before closes of the same request
    let mut keyed: Vec<(u32, u32, usize, TraceEvent)> = Vec::new();
    for (rank, &i) in order.iter().enumerate() {
        let id = rank as ReqId + 1;
        let s = staged[i];
        let key = tiebreak.get(i).copied().unwrap_or(0) as usize;
        keyed.push((s.issue, 0, rank, TraceEvent::request(ms(s.issue), EventType::RequestIssued, id, "x")));
        if let Some((t, kind)) = s.close {
            keyed.push((t, 1, key * staged.len() + rank, TraceEvent::request(ms(t), kind, id, "x")));
        }
    }
    keyed.sort_by_key(|(t, phase, key, _)| (*t, *phase, *key));
    let mut events = vec![TraceEvent::new(0.0, EventType::SessionStart)];
    events.extend(keyed.into_iter().map(|(_, _, _, e)| e));
    events.push(TraceEvent::new(ms(end), EventType::SessionEnd));
    Trace::new(events)
}

/// Random requests on a millisecond grid; some never answered, some
/// cancelled or evicted.
pub fn random_staged<R: Rng>(rng: &mut R) -> (Vec<Staged>, u32, Vec<u32>) {
    let n = rng.gen_range(0..12);
    let horizon = rng.gen_range(1_000..20_000);
    let staged: Vec<Staged> = (0..n)
        .map(|_| {
            let issue = rng.gen_range(0..horizon);
            let close = match rng.gen_range(0..10) {
                0 => None,
                1 => Some((issue + rng.gen_range(1..3_000), EventType::Cancelled)),
                2 => Some((issue + rng.gen_range(1..3_000), EventType::Evicted)),
                _ => Some((issue + rng.gen_range(1..6_000), EventType::ResponseArrived)),
            };
            Staged { issue, close }
        })
        .collect();
    let last = staged
        .iter()
        .map(|s| s.close.map_or(s.issue, |(t, _)| t))
        .max()
        .unwrap_or(0);
    let end = last + rng.gen_range(1..2_000);
    let tiebreak = (0..n).map(|_| rng.gen_range(0..4)).collect();
    (staged, end, tiebreak)
}

/// Share of 1 ms cells whose midpoint has at least two requests in flight.
pub fn concurrency_grid_oracle(staged: &[Staged], end: u32) -> f64 {
    if end == 0 {
        return 0.0;
    }
    let mut busy = 0usize;
    for cell in 0..end {
        let mid = cell as f64 + 0.5;
        let live = staged
            .iter()
            .filter(|s| {
                let close = s.close.map_or(end, |(t, _)| t.min(end)) as f64;
                (s.issue as f64) <= mid && mid < close
            })
            .count();
        if live >= 2 {
            busy += 1;
        }
    }
    busy as f64 / end as f64
}

/// Every pair (i, j) with i issued before j but j's response logged first.
pub fn inversions_oracle(trace: &Trace) -> Vec<(ReqId, ReqId)> {
    let position = |kind: EventType| -> HashMap<ReqId, usize> {
        trace
            .events
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind == kind)
            .filter_map(|(i, e)| e.req_id.map(|id| (id, i)))
            .collect()
    };
    let issued = position(EventType::RequestIssued);
    let arrived = position(EventType::ResponseArrived);
    let mut pairs = Vec::new();
    for (&i, &issue_i) in &issued {
        for (&j, &issue_j) in &issued {
            if issue_i >= issue_j {
                continue;
            }
            if let (Some(ai), Some(aj)) = (arrived.get(&i), arrived.get(&j)) {
                if aj < ai {
                    pairs.push((i, j));
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Positions of renders that do not belong to the last request issued before
/// them.
pub fn mismatch_oracle(trace: &Trace) -> Vec<usize> {
    let mut flagged = Vec::new();
    for (p, e) in trace.events.iter().enumerate() {
        if e.kind != EventType::RenderApplied {
            continue;
        }
        let latest = trace.events[..p]
            .iter()
            .rev()
            .find(|x| x.kind == EventType::RequestIssued)
            .and_then(|x| x.req_id);
        if latest.is_some() && latest != e.req_id {
            flagged.push(p);
        }
    }
    flagged
}

// ---------------------------------------------------------------------------
// statistics oracles

/// Mid-ranks by counting: rank = (#smaller) + (#equal + 1) / 2.
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| {
            let below = values.iter().filter(|x| *x < v).count() as f64;
            let equal = values.iter().filter(|x| *x == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

/// (P(W+ <= w), P(W+ >= w)) over all 2^n sign assignments.
pub fn signed_rank_enumeration(diffs: &[f64]) -> (f64, f64, f64) {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nonzero.len();
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = mid_ranks(&abs);
    let observed: f64 = nonzero.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let (mut below, mut above) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= observed {
            below += 1;
        }
        if w >= observed {
            above += 1;
        }
    }
    let total = (1u64 << n) as f64;
    (observed, below as f64 / total, above as f64 / total)
}

/// (R1, P(R1 <= r), P(R1 >= r)) over all C(n+m, n) labelings.
pub fn rank_sum_enumeration(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let big_n = pooled.len();
    let ranks = mid_ranks(&pooled);
    let observed: f64 = ranks[..x.len()].iter().sum();
    let (mut below, mut above, mut all) = (0u64, 0u64, 0u64);
    for mask in 0u64..(1 << big_n) {
        if mask.count_ones() as usize != x.len() {
            continue;
        }
        let r: f64 = (0..big_n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        all += 1;
        if r <= observed {
            below += 1;
        }
        if r >= observed {
            above += 1;
        }
    }
    (observed, below as f64 / all as f64, above as f64 / all as f64)
}

pub fn two_sided(lo: f64, hi: f64) -> f64 {
    (2.0 * lo.min(hi)).min(1.0)
}

/// Integer-valued samples with frequent ties.
pub fn tied_sample<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-6..=6) as f64 * 0.5).collect()
}
