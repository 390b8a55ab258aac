use serde::{Deserialize, Serialize};

/// Session-scoped request identifier. Strictly increasing in issue order.
pub type ReqId = u64;

/// Number of distinct hues available to the categorical encoding.
pub const PALETTE_SIZE: u64 = 8;

/// One point of a response series: ordinal x position and its value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: u32,
    pub value: f64,
}

impl Point {
    pub fn new(x: u32, value: f64) -> Self {
        Self { x, value }
    }
}

/// A single user interaction (a hover on a facet widget).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRequest {
    pub req_id: ReqId,
    pub target: String,
    pub issued_at: f64,
}

impl InteractionRequest {
    pub fn new(req_id: ReqId, target: impl Into<String>, issued_at: f64) -> Self {
        Self {
            req_id,
            target: target.into(),
            issued_at,
        }
    }
}

/// The (possibly late) data result of a request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponsePayload {
    pub req_id: ReqId,
    pub series: Vec<Point>,
    pub arrived_at: f64,
}

impl ResponsePayload {
    pub fn new(req_id: ReqId, series: Vec<Point>, arrived_at: f64) -> Self {
        Self {
            req_id,
            series,
            arrived_at,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Recency rank, 0 = most recent.
    Ordinal,
    /// Stable hue index derived from the request id.
    Categorical,
}

/// Visual channel linking a request to its response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EncodingToken {
    pub scheme: Scheme,
    pub level: u32,
}

impl EncodingToken {
    pub fn ordinal(level: u32) -> Self {
        Self {
            scheme: Scheme::Ordinal,
            level,
        }
    }

    pub fn categorical(req_id: ReqId) -> Self {
        Self {
            scheme: Scheme::Categorical,
            level: (req_id % PALETTE_SIZE) as u32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryState {
    Pending,
    Rendered,
    Cancelled,
}

/// A request paired with its response, housed in one screen slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChronicleEntry {
    pub request: InteractionRequest,
    pub response: Option<ResponsePayload>,
    pub slot: usize,
    pub encoding: EncodingToken,
    pub state: EntryState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DirectiveKind {
    SpinnerOn,
    SpinnerOff,
    RenderResponse,
    ReplaceInPlace,
    Evict,
    Cancel,
    Recolor,
    Hold,
    Release,
}

/// An atomic screen mutation. The UI applies these in order and keeps no
/// policy logic of its own, so render directives carry the series to draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderDirective {
    pub kind: DirectiveKind,
    pub req_id: ReqId,
    pub target: String,
    pub slot: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoding: Option<EncodingToken>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<Vec<Point>>,
    pub at: f64,
}

impl RenderDirective {
    pub(crate) fn new(kind: DirectiveKind, req_id: ReqId, target: &str, slot: usize, at: f64) -> Self {
        Self {
            kind,
            req_id,
            target: target.to_string(),
            slot,
            encoding: None,
            series: None,
            at,
        }
    }

    pub(crate) fn with_encoding(mut self, encoding: EncodingToken) -> Self {
        self.encoding = Some(encoding);
        self
    }

    pub(crate) fn with_series(mut self, series: Vec<Point>) -> Self {
        self.series = Some(series);
        self
    }

    /// True for directives that put response data on screen.
    pub fn is_render(&self) -> bool {
        matches!(self.kind, DirectiveKind::RenderResponse | DirectiveKind::ReplaceInPlace)
    }
}

/// One visible slot in a [`Snapshot`].
#[derive(Debug, Clone, PartialEq)]
pub struct VisibleEntry {
    pub req_id: ReqId,
    pub slot: usize,
    pub target: String,
    pub state: EntryState,
    pub encoding: EncodingToken,
    pub series: Option<Vec<Point>>,
}

/// What the screen shows: occupied slots (ordered by request id) and the
/// requests whose loading spinner is currently on.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Snapshot {
    pub entries: Vec<VisibleEntry>,
    pub spinners: Vec<(ReqId, String)>,
}

impl Snapshot {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.spinners.is_empty()
    }

    pub fn rendered(&self) -> impl Iterator<Item = &VisibleEntry> {
        self.entries.iter().filter(|e| e.state == EntryState::Rendered)
    }

    pub fn has_pending(&self) -> bool {
        !self.spinners.is_empty()
    }
}
