//! The chronicle buffer: a bounded, ordered set of request/response pairs
//! plus the rendering policy that turns admissions into screen directives.
//!
//! Single-slot policies (`Blocking`, `Naive`, `Animation`) keep one display
//! entry in slot 0. Requests superseded there without being cancelled stay
//! in flight off-screen and render in place when their response arrives.
//! Multi-slot policies keep up to `capacity` entries, each in its own slot,
//! and evict request and response together.

mod policy;
mod types;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use thiserror::Error;

pub use policy::{PolicySpec, DEFAULT_MIN_DWELL};
pub use types::{
    ChronicleEntry, DirectiveKind, EncodingToken, EntryState, InteractionRequest, Point, RenderDirective,
    ReqId, ResponsePayload, Scheme, Snapshot, VisibleEntry, PALETTE_SIZE,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChronicleError {
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("unknown request id {0}")]
    UnknownRequest(ReqId),
    #[error("duplicate response for request {0}")]
    DuplicateResponse(ReqId),
    #[error("invalid payload: {0}")]
    InvalidPayload(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    /// Awaiting its response, on screen or detached.
    InFlight,
    /// Response arrived but is held back (animation ordering).
    Held,
    Rendered,
    /// Rendered, then displaced by an in-place render of another request.
    Replaced,
    Cancelled,
    Evicted,
}

#[derive(Debug, Clone)]
struct Admitted {
    target: String,
    issued_at: f64,
    status: Status,
    responded: bool,
}

#[derive(Debug, Clone, Default)]
struct HoldQueue {
    by_id: BTreeMap<ReqId, ResponsePayload>,
    by_arrival: VecDeque<ReqId>,
    last_release: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ChronicleBuffer {
    policy: PolicySpec,
    layout: Vec<String>,
    entries: Vec<ChronicleEntry>,
    detached: BTreeMap<ReqId, InteractionRequest>,
    admitted: BTreeMap<ReqId, Admitted>,
    history: Vec<(ReqId, String)>,
    target_slots: HashMap<String, usize>,
    last_req: Option<ReqId>,
    admissions: u64,
    now: f64,
    holds: HoldQueue,
}

impl ChronicleBuffer {
    /// Creates an empty buffer. `Cumulative` assigns placeholder slots to
    /// targets in first-seen order; use [`ChronicleBuffer::with_layout`] to
    /// pin them to a known facet order.
    pub fn new(policy: PolicySpec) -> Result<Self, ChronicleError> {
        Self::with_layout(policy, Vec::new())
    }

    pub fn with_layout(policy: PolicySpec, layout: Vec<String>) -> Result<Self, ChronicleError> {
        policy.validate()?;
        let target_slots = layout.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Ok(Self {
            policy,
            layout,
            entries: Vec::new(),
            detached: BTreeMap::new(),
            admitted: BTreeMap::new(),
            history: Vec::new(),
            target_slots,
            last_req: None,
            admissions: 0,
            now: f64::NEG_INFINITY,
            holds: HoldQueue::default(),
        })
    }

    pub fn policy(&self) -> &PolicySpec {
        &self.policy
    }

    pub fn capacity(&self) -> usize {
        match self.policy {
            PolicySpec::Cumulative if self.layout.is_empty() => self.target_slots.len().max(1),
            _ => self.policy.capacity(self.layout.len()),
        }
    }

    pub fn entries(&self) -> &[ChronicleEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Latest time seen by the buffer.
    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn admit_request(&mut self, request: InteractionRequest) -> Result<Vec<RenderDirective>, ChronicleError> {
        if self.capacity() < 1 && !matches!(self.policy, PolicySpec::Cumulative) {
            return Err(ChronicleError::Configuration("capacity must be at least 1".into()));
        }
        if let Some(last) = self.last_req {
            if request.req_id <= last {
                return Err(ChronicleError::ProtocolViolation(format!(
                    "request id {} is not greater than {last}",
                    request.req_id
                )));
            }
        }
        if !request.issued_at.is_finite() || request.issued_at < self.now {
            return Err(ChronicleError::ProtocolViolation(format!(
                "request {} issued at {} before buffer time {}",
                request.req_id, request.issued_at, self.now
            )));
        }

        let at = request.issued_at;
        let mut out = Vec::new();
        let slot = match self.policy.clone() {
            PolicySpec::Blocking | PolicySpec::Naive | PolicySpec::Animation { .. } => {
                if let Some(display) = self.entries.pop() {
                    self.vacate_display(display, at, true, &mut out);
                }
                0
            }
            PolicySpec::Cumulative => {
                let slot = self.cumulative_slot(&request.target)?;
                if let Some(pos) = self.entries.iter().position(|e| e.slot == slot) {
                    self.evict_at(pos, at, &mut out);
                }
                slot
            }
            PolicySpec::SmallMultiples { cap, .. } => {
                if self.entries.len() >= cap {
                    self.evict_at(0, at, &mut out);
                }
                (self.admissions % cap as u64) as usize
            }
            PolicySpec::Overlay { cap, .. } => {
                if self.entries.len() >= cap {
                    self.evict_at(0, at, &mut out);
                }
                self.lowest_free_slot()
            }
        };

        let before = self.levels();
        let encoding = match self.policy.scheme() {
            Scheme::Ordinal => EncodingToken::ordinal(0),
            Scheme::Categorical => EncodingToken::categorical(request.req_id),
        };
        out.push(
            RenderDirective::new(DirectiveKind::SpinnerOn, request.req_id, &request.target, slot, at)
                .with_encoding(encoding),
        );
        self.admitted.insert(
            request.req_id,
            Admitted {
                target: request.target.clone(),
                issued_at: at,
                status: Status::InFlight,
                responded: false,
            },
        );
        self.history.push((request.req_id, request.target.clone()));
        self.last_req = Some(request.req_id);
        self.admissions += 1;
        self.now = at;
        self.entries.push(ChronicleEntry {
            request,
            response: None,
            slot,
            encoding,
            state: EntryState::Pending,
        });
        self.rerank(&before, at, &mut out);
        Ok(out)
    }

    /// Admits a response. An empty directive list means the payload was
    /// dropped because its request was cancelled or evicted.
    pub fn admit_response(&mut self, payload: ResponsePayload) -> Result<Vec<RenderDirective>, ChronicleError> {
        if payload.series.is_empty() {
            return Err(ChronicleError::InvalidPayload(format!(
                "empty series for request {}",
                payload.req_id
            )));
        }
        if !payload.arrived_at.is_finite() || payload.arrived_at < self.now {
            return Err(ChronicleError::ProtocolViolation(format!(
                "response {} arrived at {} before buffer time {}",
                payload.req_id, payload.arrived_at, self.now
            )));
        }
        let req_id = payload.req_id;
        let record = self
            .admitted
            .get_mut(&req_id)
            .ok_or(ChronicleError::UnknownRequest(req_id))?;
        if payload.arrived_at < record.issued_at {
            return Err(ChronicleError::ProtocolViolation(format!(
                "response {req_id} arrived before its request was issued"
            )));
        }
        if record.responded {
            return Err(ChronicleError::DuplicateResponse(req_id));
        }
        record.responded = true;
        let status = record.status;
        let at = payload.arrived_at;
        self.now = at;

        let mut out = Vec::new();
        match status {
            Status::Cancelled | Status::Evicted => {}
            Status::InFlight => match self.policy {
                PolicySpec::Blocking | PolicySpec::Naive => self.render_in_place(payload, at, &mut out),
                PolicySpec::Animation { .. } => {
                    self.holds.by_id.insert(req_id, payload);
                    self.holds.by_arrival.push_back(req_id);
                    self.set_status(req_id, Status::Held);
                    let mut released = Vec::new();
                    self.drain_holds(at, &mut released);
                    if self.status(req_id) == Some(Status::Held) {
                        let slot = 0;
                        let target = self.admitted[&req_id].target.clone();
                        out.push(RenderDirective::new(DirectiveKind::Hold, req_id, &target, slot, at));
                    }
                    out.extend(released);
                }
                _ => self.render_into_slot(payload, at, &mut out),
            },
            Status::Held | Status::Rendered | Status::Replaced => {
                unreachable!("a request with a recorded response cannot be re-admitted")
            }
        }
        Ok(out)
    }

    /// When the next held response becomes releasable, if one is waiting.
    pub fn next_release_at(&self) -> Option<f64> {
        let PolicySpec::Animation { min_dwell, .. } = self.policy else {
            return None;
        };
        let head = self.hold_candidate()?;
        if !self.holds.by_id.contains_key(&head) {
            return None;
        }
        Some(self.holds.last_release.map_or(self.now, |t| t + min_dwell))
    }

    /// Releases every held response that is due at `now`.
    pub fn release_due(&mut self, now: f64) -> Result<Vec<RenderDirective>, ChronicleError> {
        if !now.is_finite() || now < self.now {
            return Err(ChronicleError::ProtocolViolation(format!(
                "release at {now} before buffer time {}",
                self.now
            )));
        }
        self.now = now;
        let mut out = Vec::new();
        self.drain_holds(now, &mut out);
        Ok(out)
    }

    /// Correspondence encoding of every live entry under `scheme`.
    pub fn assign_encoding(&self, scheme: Scheme) -> BTreeMap<ReqId, EncodingToken> {
        let n = self.entries.len();
        self.entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let token = match scheme {
                    Scheme::Ordinal => EncodingToken::ordinal((n - 1 - i) as u32),
                    Scheme::Categorical => EncodingToken::categorical(e.request.req_id),
                };
                (e.request.req_id, token)
            })
            .collect()
    }

    pub fn snapshot(&self) -> Snapshot {
        let entries = self
            .entries
            .iter()
            .map(|e| VisibleEntry {
                req_id: e.request.req_id,
                slot: e.slot,
                target: e.request.target.clone(),
                state: e.state,
                encoding: e.encoding,
                series: e.response.as_ref().map(|r| r.series.clone()),
            })
            .collect();
        let spinners = self
            .admitted
            .iter()
            .filter(|(_, a)| matches!(a.status, Status::InFlight | Status::Held))
            .map(|(id, a)| (*id, a.target.clone()))
            .collect();
        Snapshot { entries, spinners }
    }

    /// Recency rank of the `depth` most recently hovered targets.
    pub fn widget_history(&self, depth: usize) -> BTreeMap<String, usize> {
        let mut ranks = BTreeMap::new();
        for (_, target) in self.history.iter().rev() {
            if ranks.len() >= depth {
                break;
            }
            if !ranks.contains_key(target) {
                let rank = ranks.len();
                ranks.insert(target.clone(), rank);
            }
        }
        ranks
    }

    fn status(&self, req_id: ReqId) -> Option<Status> {
        self.admitted.get(&req_id).map(|a| a.status)
    }

    fn set_status(&mut self, req_id: ReqId, status: Status) {
        if let Some(a) = self.admitted.get_mut(&req_id) {
            a.status = status;
        }
    }

    fn cumulative_slot(&mut self, target: &str) -> Result<usize, ChronicleError> {
        if let Some(slot) = self.target_slots.get(target) {
            return Ok(*slot);
        }
        if !self.layout.is_empty() {
            return Err(ChronicleError::ProtocolViolation(format!(
                "target `{target}` is not part of the facet layout"
            )));
        }
        let slot = self.target_slots.len();
        self.target_slots.insert(target.to_string(), slot);
        Ok(slot)
    }

    fn lowest_free_slot(&self) -> usize {
        let used: BTreeSet<usize> = self.entries.iter().map(|e| e.slot).collect();
        (0..).find(|s| !used.contains(s)).unwrap_or(0)
    }

    fn levels(&self) -> BTreeMap<ReqId, u32> {
        self.entries
            .iter()
            .map(|e| (e.request.req_id, e.encoding.level))
            .collect()
    }

    /// Re-ranks ordinal encodings; if any surviving entry changed level the
    /// whole live set is recolored.
    fn rerank(&mut self, before: &BTreeMap<ReqId, u32>, at: f64, out: &mut Vec<RenderDirective>) {
        if self.policy.scheme() != Scheme::Ordinal {
            return;
        }
        let ranks = self.assign_encoding(Scheme::Ordinal);
        let mut changed = false;
        for entry in &mut self.entries {
            let token = ranks[&entry.request.req_id];
            if before.get(&entry.request.req_id).is_some_and(|l| *l != token.level) {
                changed = true;
            }
            entry.encoding = token;
        }
        if changed {
            for entry in &self.entries {
                out.push(
                    RenderDirective::new(DirectiveKind::Recolor, entry.request.req_id, &entry.request.target, entry.slot, at)
                        .with_encoding(entry.encoding),
                );
            }
        }
    }

    fn evict_at(&mut self, pos: usize, at: f64, out: &mut Vec<RenderDirective>) {
        let entry = self.entries.remove(pos);
        out.push(RenderDirective::new(
            DirectiveKind::Evict,
            entry.request.req_id,
            &entry.request.target,
            entry.slot,
            at,
        ));
        self.set_status(entry.request.req_id, Status::Evicted);
    }

    /// Clears slot 0 of a single-slot buffer. A pending display entry is
    /// cancelled under `Blocking` and detached (kept in flight) otherwise.
    fn vacate_display(&mut self, display: ChronicleEntry, at: f64, admitting: bool, out: &mut Vec<RenderDirective>) {
        let id = display.request.req_id;
        match display.state {
            EntryState::Pending if matches!(self.policy, PolicySpec::Blocking) => {
                out.push(RenderDirective::new(
                    DirectiveKind::Cancel,
                    id,
                    &display.request.target,
                    display.slot,
                    at,
                ));
                self.set_status(id, Status::Cancelled);
            }
            EntryState::Pending => {
                self.detached.insert(id, display.request);
            }
            EntryState::Rendered if admitting => {
                out.push(RenderDirective::new(
                    DirectiveKind::Evict,
                    id,
                    &display.request.target,
                    display.slot,
                    at,
                ));
                self.set_status(id, Status::Evicted);
            }
            EntryState::Rendered => self.set_status(id, Status::Replaced),
            EntryState::Cancelled => {}
        }
    }

    fn render_in_place(&mut self, payload: ResponsePayload, at: f64, out: &mut Vec<RenderDirective>) {
        let id = payload.req_id;
        let request = match self.entries.iter().position(|e| e.request.req_id == id) {
            Some(pos) => self.entries.remove(pos).request,
            None => {
                if let Some(display) = self.entries.pop() {
                    self.vacate_display(display, at, false, out);
                }
                self.detached
                    .remove(&id)
                    .expect("in-flight request is either on display or detached")
            }
        };
        let encoding = EncodingToken::ordinal(0);
        out.push(
            RenderDirective::new(DirectiveKind::ReplaceInPlace, id, &request.target, 0, at)
                .with_encoding(encoding)
                .with_series(payload.series.clone()),
        );
        out.push(RenderDirective::new(DirectiveKind::SpinnerOff, id, &request.target, 0, at));
        self.set_status(id, Status::Rendered);
        self.entries.push(ChronicleEntry {
            request,
            response: Some(payload),
            slot: 0,
            encoding,
            state: EntryState::Rendered,
        });
    }

    fn render_into_slot(&mut self, payload: ResponsePayload, at: f64, out: &mut Vec<RenderDirective>) {
        let id = payload.req_id;
        let entry = self
            .entries
            .iter_mut()
            .find(|e| e.request.req_id == id)
            .expect("in-flight multi-slot request is live");
        out.push(
            RenderDirective::new(DirectiveKind::RenderResponse, id, &entry.request.target, entry.slot, at)
                .with_encoding(entry.encoding)
                .with_series(payload.series.clone()),
        );
        out.push(RenderDirective::new(DirectiveKind::SpinnerOff, id, &entry.request.target, entry.slot, at));
        entry.response = Some(payload);
        entry.state = EntryState::Rendered;
        self.set_status(id, Status::Rendered);
    }

    /// Next request whose held response may be released, ignoring dwell.
    fn hold_candidate(&self) -> Option<ReqId> {
        let PolicySpec::Animation { in_order, .. } = self.policy else {
            return None;
        };
        if in_order {
            // earliest-issued request that has not been released yet
            self.admitted
                .iter()
                .find(|(_, a)| matches!(a.status, Status::InFlight | Status::Held))
                .map(|(id, _)| *id)
        } else {
            self.holds.by_arrival.front().copied()
        }
    }

    fn drain_holds(&mut self, now: f64, out: &mut Vec<RenderDirective>) {
        let PolicySpec::Animation { min_dwell, .. } = self.policy else {
            return;
        };
        while let Some(head) = self.hold_candidate() {
            if !self.holds.by_id.contains_key(&head) {
                break;
            }
            if let Some(last) = self.holds.last_release {
                if now < last + min_dwell {
                    break;
                }
            }
            let payload = self.holds.by_id.remove(&head).expect("checked above");
            self.holds.by_arrival.retain(|id| *id != head);
            self.holds.last_release = Some(now);
            self.set_status(head, Status::InFlight);
            let target = self.admitted[&head].target.clone();
            out.push(RenderDirective::new(DirectiveKind::Release, head, &target, 0, now));
            self.render_in_place(payload, now, out);
        }
    }
}
