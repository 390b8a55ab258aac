//! Append-only session log: one JSON object per line.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chronicle::{DirectiveKind, EncodingToken, RenderDirective, ReqId};
use crate::session::SessionConfig;
use crate::workload::Answer;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("invalid trace: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventType {
    SessionStart,
    RequestIssued,
    ResponseArrived,
    RenderApplied,
    SpinnerOn,
    SpinnerOff,
    Evicted,
    Cancelled,
    Recolored,
    DroppedResponse,
    Held,
    Released,
    AnswerSubmitted,
    SessionEnd,
}

impl EventType {
    /// Events that mirror a render directive.
    pub fn is_directive(self) -> bool {
        matches!(
            self,
            EventType::RenderApplied
                | EventType::SpinnerOn
                | EventType::SpinnerOff
                | EventType::Evicted
                | EventType::Cancelled
                | EventType::Recolored
                | EventType::Held
                | EventType::Released
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: f64,
    #[serde(rename = "type")]
    pub kind: EventType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub req_id: Option<ReqId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<Answer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<Box<SessionConfig>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub encoding: Option<EncodingToken>,
}

impl TraceEvent {
    pub fn new(t: f64, kind: EventType) -> Self {
        Self {
            t,
            kind,
            req_id: None,
            target: None,
            slot: None,
            answer: None,
            correct: None,
            config: None,
            encoding: None,
        }
    }

    pub fn session_start(t: f64, config: SessionConfig) -> Self {
        Self {
            config: Some(Box::new(config)),
            ..Self::new(t, EventType::SessionStart)
        }
    }

    pub fn request(t: f64, kind: EventType, req_id: ReqId, target: &str) -> Self {
        Self {
            req_id: Some(req_id),
            target: Some(target.to_string()),
            ..Self::new(t, kind)
        }
    }

    pub fn answer(t: f64, answer: Answer, correct: bool) -> Self {
        Self {
            answer: Some(answer),
            correct: Some(correct),
            ..Self::new(t, EventType::AnswerSubmitted)
        }
    }

    pub fn from_directive(d: &RenderDirective) -> Self {
        let kind = match d.kind {
            DirectiveKind::SpinnerOn => EventType::SpinnerOn,
            DirectiveKind::SpinnerOff => EventType::SpinnerOff,
            DirectiveKind::RenderResponse | DirectiveKind::ReplaceInPlace => EventType::RenderApplied,
            DirectiveKind::Evict => EventType::Evicted,
            DirectiveKind::Cancel => EventType::Cancelled,
            DirectiveKind::Recolor => EventType::Recolored,
            DirectiveKind::Hold => EventType::Held,
            DirectiveKind::Release => EventType::Released,
        };
        Self {
            slot: Some(d.slot),
            encoding: d.encoding,
            ..Self::request(d.at, kind, d.req_id, &d.target)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new(events: Vec<TraceEvent>) -> Self {
        Self { events }
    }

    pub fn push(&mut self, event: TraceEvent) {
        self.events.push(event);
    }

    pub fn config(&self) -> Option<&SessionConfig> {
        self.events
            .iter()
            .find(|e| e.kind == EventType::SessionStart)
            .and_then(|e| e.config.as_deref())
    }

    pub fn start_time(&self) -> Option<f64> {
        self.first(EventType::SessionStart).map(|e| e.t)
    }

    /// Time of the submitted answer, else of the session end.
    pub fn end_time(&self) -> Option<f64> {
        self.first(EventType::AnswerSubmitted)
            .or_else(|| self.first(EventType::SessionEnd))
            .map(|e| e.t)
    }

    pub fn completion_time(&self) -> Option<f64> {
        Some(self.end_time()? - self.start_time()?)
    }

    pub fn submitted(&self) -> Option<(&Answer, Option<bool>)> {
        self.first(EventType::AnswerSubmitted)
            .and_then(|e| e.answer.as_ref().map(|a| (a, e.correct)))
    }

    pub fn of_kind(&self, kind: EventType) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn request_count(&self) -> usize {
        self.of_kind(EventType::RequestIssued).count()
    }

    fn first(&self, kind: EventType) -> Option<&TraceEvent> {
        self.events.iter().find(|e| e.kind == kind)
    }

    /// Checks time order and that every referenced request was issued.
    pub fn validate(&self) -> Result<(), TraceError> {
        let mut issued = HashSet::new();
        let mut last = f64::NEG_INFINITY;
        for (i, e) in self.events.iter().enumerate() {
            if !e.t.is_finite() || e.t < last {
                return Err(TraceError::Invalid(format!("event {} at t={} is out of order", i + 1, e.t)));
            }
            last = e.t;
            match (e.kind, e.req_id) {
                (EventType::RequestIssued, Some(id)) => {
                    issued.insert(id);
                }
                (EventType::RequestIssued, None) => {
                    return Err(TraceError::Invalid(format!("event {} issues a request without id", i + 1)));
                }
                (_, Some(id)) if !issued.contains(&id) => {
                    return Err(TraceError::Invalid(format!("event {} references unknown request {id}", i + 1)));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("trace events serialize"));
            out.push('\n');
        }
        out
    }

    /// Parses JSON lines; blank lines are skipped.
    pub fn from_jsonl(text: &str) -> Result<Self, TraceError> {
        let (trace, err) = parse_lines(text.lines().map(|l| Ok(l.to_string())));
        match err {
            Some(e) => Err(e),
            None => Ok(trace),
        }
    }
}

fn parse_lines<I>(lines: I) -> (Trace, Option<TraceError>)
where
    I: Iterator<Item = std::io::Result<String>>,
{
    let mut trace = Trace::default();
    for (i, line) in lines.enumerate() {
        let line = match line {
            Ok(l) => l,
            Err(e) => return (trace, Some(TraceError::Io(e))),
        };
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<TraceEvent>(&line) {
            Ok(e) => trace.push(e),
            Err(e) => {
                return (
                    trace,
                    Some(TraceError::Parse {
                        line: i + 1,
                        detail: e.to_string(),
                    }),
                )
            }
        }
    }
    (trace, None)
}

pub fn persist_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<(), TraceError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(trace.to_jsonl().as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace, TraceError> {
    let (trace, err) = load_trace_lenient(path)?;
    match err {
        Some(e) => Err(e),
        None => Ok(trace),
    }
}

/// Loads every event up to the first bad line and returns that line's error
/// alongside them.
pub fn load_trace_lenient(path: impl AsRef<Path>) -> Result<(Trace, Option<TraceError>), TraceError> {
    let reader = BufReader::new(File::open(path)?);
    Ok(parse_lines(reader.lines()))
}

/// Appends events to a trace file as they happen.
pub struct TraceWriter {
    out: BufWriter<File>,
}

impl TraceWriter {
    pub fn append_to(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            out: BufWriter::new(file),
        })
    }

    pub fn append(&mut self, event: &TraceEvent) -> Result<(), TraceError> {
        serde_json::to_writer(&mut self.out, event).map_err(std::io::Error::from)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), TraceError> {
        self.out.flush()?;
        Ok(())
    }
}
