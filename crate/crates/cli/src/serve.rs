use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use chronicle::session::{ClientMessage, LiveSession, ServerMessage, SessionConfig};
use chronicle::trace::persist_trace;
use futures_util::{SinkExt, StreamExt};
use tokio::net::{TcpListener, TcpStream};
use tokio_tungstenite::tungstenite::Message;

struct Shared {
    default_config: Option<SessionConfig>,
    out: Option<PathBuf>,
    started: Instant,
    sessions: AtomicUsize,
}

impl Shared {
    fn now(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    fn save(&self, session: &LiveSession) {
        let (Some(dir), Some(trace)) = (&self.out, session.trace()) else {
            return;
        };
        let n = self.sessions.fetch_add(1, Ordering::SeqCst);
        let path = dir.join(format!("session-{n}.jsonl"));
        if let Err(e) = persist_trace(trace, &path) {
            eprintln!("{}", serde_json::json!({"error": {"code": "trace", "message": e.to_string()}}));
        }
    }
}

/// Accepts WebSocket clients on `port`, one isolated session per connection.
/// Prints the bound address as a JSON line once listening.
pub async fn serve(port: u16, default_config: Option<SessionConfig>, out: Option<PathBuf>) -> Result<()> {
    let listener = TcpListener::bind(("127.0.0.1", port))
        .await
        .with_context(|| format!("binding port {port}"))?;
    println!("{}", serde_json::json!({"listening": listener.local_addr()?.to_string()}));
    std::io::stdout().flush()?;
    let shared = Arc::new(Shared {
        default_config,
        out,
        started: Instant::now(),
        sessions: AtomicUsize::new(0),
    });
    loop {
        let (stream, _) = listener.accept().await?;
        let shared = Arc::clone(&shared);
        tokio::spawn(async move {
            if let Err(e) = connection(stream, shared).await {
                eprintln!("{}", serde_json::json!({"error": {"code": "connection", "message": format!("{e:#}")}}));
            }
        });
    }
}

async fn connection(stream: TcpStream, shared: Arc<Shared>) -> Result<()> {
    let ws = tokio_tungstenite::accept_async(stream).await?;
    let (mut tx, mut rx) = ws.split();
    let mut session = match &shared.default_config {
        Some(config) => LiveSession::with_default_config(config.clone()),
        None => LiveSession::new(),
    };
    let mut saved = false;
    loop {
        let wake = session
            .next_due()
            .map(|due| shared.started + Duration::from_secs_f64(due.max(0.0)));
        let replies = tokio::select! {
            frame = rx.next() => match frame {
                Some(Ok(Message::Text(text))) => {
                    let starts_over = matches!(
                        serde_json::from_str::<ClientMessage>(&text),
                        Ok(ClientMessage::Hello { .. })
                    );
                    if starts_over && session.is_started() && !saved {
                        shared.save(&session);
                    }
                    let replies = session.handle_text(&text, shared.now());
                    if starts_over && session.is_started() {
                        saved = false;
                    }
                    replies
                }
                Some(Ok(Message::Binary(_))) => vec![ServerMessage::error("malformed", "expected a text frame")],
                // a dropped connection ends the session like a close
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                Some(Ok(_)) => continue,
            },
            _ = sleep_until(wake) => session.poll(shared.now()),
        };
        for reply in &replies {
            tx.send(Message::Text(reply.to_json())).await?;
        }
        if session.is_finished() && !saved {
            shared.save(&session);
            saved = true;
        }
    }
    if session.is_started() && !saved {
        shared.save(&session);
    }
    Ok(())
}

async fn sleep_until(at: Option<Instant>) {
    match at {
        Some(at) => tokio::time::sleep_until(tokio::time::Instant::from_std(at)).await,
        None => std::future::pending().await,
    }
}
