//! Wire protocol messages. Each text frame carries one JSON object tagged by
//! `type`.

use serde::{Deserialize, Serialize};

use super::SessionConfig;
use crate::analytics::MetricReport;
use crate::chronicle::RenderDirective;
use crate::workload::Answer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    /// Starts a fresh session. Without a config the server's default is used.
    Hello {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        config: Option<SessionConfig>,
    },
    Interact {
        target: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client_time: Option<f64>,
    },
    SubmitAnswer {
        answer: Answer,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    ConfigAck { task_question: String },
    Render { directive: RenderDirective },
    Summary { metrics: MetricReport, correct: bool },
    Error { code: String, detail: String },
}

impl ServerMessage {
    pub fn error(code: &str, detail: impl Into<String>) -> Self {
        ServerMessage::Error {
            code: code.to_string(),
            detail: detail.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interact_wire_shape() {
        let msg: ClientMessage = serde_json::from_str(r#"{"type":"interact","target":"Mar","client_time":1.5}"#).unwrap();
        assert_eq!(
            msg,
            ClientMessage::Interact {
                target: "Mar".into(),
                client_time: Some(1.5)
            }
        );
        let msg: ClientMessage = serde_json::from_str(r#"{"type":"submit_answer","answer":true}"#).unwrap();
        assert_eq!(msg, ClientMessage::SubmitAnswer { answer: Answer::Exists(true) });
    }

    #[test]
    fn server_messages_are_tagged() {
        let json = ServerMessage::error("protocol", "hello first").to_json();
        assert_eq!(json, r#"{"type":"error","code":"protocol","detail":"hello first"}"#);
        let ack = ServerMessage::ConfigAck {
            task_question: "q".into(),
        };
        assert!(ack.to_json().starts_with(r#"{"type":"config_ack""#));
    }
}
