use super::engine::Engine;
use super::protocol::{ClientMessage, ServerMessage};
use super::{Pace, SessionConfig, SessionError};
use crate::analytics::{compute_metrics, DEFAULT_FLASH_WINDOW};
use crate::chronicle::RenderDirective;
use crate::trace::Trace;

/// A live session driven by client messages. Times passed in are wall-clock
/// seconds on any monotonic scale; session time starts at the `hello`.
#[derive(Debug, Default)]
pub struct LiveSession {
    engine: Option<Engine>,
    origin: f64,
    default_config: Option<SessionConfig>,
}

fn renders(directives: Vec<RenderDirective>) -> impl Iterator<Item = ServerMessage> {
    directives
        .into_iter()
        .map(|directive| ServerMessage::Render { directive })
}

impl LiveSession {
    pub fn new() -> Self {
        Self::default()
    }

    /// A session whose `hello` may omit the config.
    pub fn with_default_config(config: SessionConfig) -> Self {
        Self {
            default_config: Some(config),
            ..Self::default()
        }
    }

    pub fn is_started(&self) -> bool {
        self.engine.is_some()
    }

    pub fn is_finished(&self) -> bool {
        self.engine.as_ref().is_some_and(Engine::is_finished)
    }

    pub fn trace(&self) -> Option<&Trace> {
        self.engine.as_ref().map(Engine::trace)
    }

    fn session_time(&self, now: f64) -> f64 {
        let engine_now = self.engine.as_ref().map_or(0.0, Engine::now);
        (now - self.origin).max(engine_now)
    }

    /// Wall-clock time of the next scheduled delivery.
    pub fn next_due(&self) -> Option<f64> {
        let engine = self.engine.as_ref().filter(|e| !e.is_finished())?;
        engine.next_due().map(|t| t + self.origin)
    }

    /// Applies every delivery due by `now`.
    pub fn poll(&mut self, now: f64) -> Vec<ServerMessage> {
        let mut t = self.session_time(now);
        let origin = self.origin;
        let Some(engine) = self.engine.as_mut().filter(|e| !e.is_finished()) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        loop {
            // `next_due` reported `due + origin`; subtracting the origin
            // again may round below `due`
            if let Some(due) = engine.next_due().filter(|d| d + origin <= now) {
                t = t.max(due);
            }
            match engine.step_until(t) {
                Ok(Some((_, directives))) => out.extend(renders(directives)),
                Ok(None) => break,
                Err(e) => {
                    out.push(ServerMessage::error(e.code(), e.to_string()));
                    break;
                }
            }
        }
        out
    }

    /// Parses and handles one text frame. Malformed frames are answered
    /// with an error and leave the session untouched.
    pub fn handle_text(&mut self, text: &str, now: f64) -> Vec<ServerMessage> {
        match serde_json::from_str::<ClientMessage>(text) {
            Ok(msg) => self.handle_client_message(msg, now),
            Err(e) => vec![ServerMessage::error("malformed", e.to_string())],
        }
    }

    pub fn handle_client_message(&mut self, msg: ClientMessage, now: f64) -> Vec<ServerMessage> {
        match msg {
            ClientMessage::Hello { config } => {
                let Some(mut config) = config.or_else(|| self.default_config.clone()) else {
                    return vec![ServerMessage::error("config", "hello carries no config and the server has no default")];
                };
                if config.agent.is_some() {
                    return vec![ServerMessage::error("config", "live sessions take no agent")];
                }
                config.pace = Pace::Realtime;
                match Engine::new(config) {
                    Ok(engine) => {
                        let task_question = engine.config().task.question();
                        self.engine = Some(engine);
                        self.origin = now;
                        vec![ServerMessage::ConfigAck { task_question }]
                    }
                    Err(e) => vec![ServerMessage::error(e.code(), e.to_string())],
                }
            }
            ClientMessage::Interact { target, .. } => {
                let mut out = match self.ready() {
                    Ok(()) => self.poll(now),
                    Err(e) => return vec![e],
                };
                let t = self.session_time(now);
                let engine = self.engine.as_mut().expect("checked by ready");
                if !engine.config().task.has_facet(&target) {
                    out.push(ServerMessage::error("unknown_facet", format!("no facet `{target}`")));
                    return out;
                }
                match engine.interact(&target, t) {
                    Ok(directives) => out.extend(renders(directives)),
                    Err(e) => out.push(ServerMessage::error(e.code(), e.to_string())),
                }
                out
            }
            ClientMessage::SubmitAnswer { answer } => {
                let mut out = match self.ready() {
                    Ok(()) => self.poll(now),
                    Err(e) => return vec![e],
                };
                let t = self.session_time(now);
                let engine = self.engine.as_mut().expect("checked by ready");
                let result = engine.submit(answer, t).map_err(SessionError::from).and_then(|correct| {
                    let metrics = compute_metrics(engine.trace(), DEFAULT_FLASH_WINDOW)?;
                    Ok(ServerMessage::Summary { metrics, correct })
                });
                out.push(result.unwrap_or_else(|e| ServerMessage::error(e.code(), e.to_string())));
                out
            }
        }
    }

    fn ready(&self) -> Result<(), ServerMessage> {
        match &self.engine {
            None => Err(ServerMessage::error("protocol", "send hello first")),
            Some(e) if e.is_finished() => Err(ServerMessage::error("session_over", "answer already submitted")),
            Some(_) => Ok(()),
        }
    }
}
