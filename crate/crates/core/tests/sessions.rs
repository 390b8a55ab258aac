use chronicle::analytics::detect_mismatch;
use chronicle::chronicle::{DirectiveKind, PolicySpec};
use chronicle::latency::LatencyProfile;
use chronicle::session::{
    directive_events, parity_config, replay, run_simulation, run_simulation_to, ClientMessage, LiveSession,
    ServerMessage, SessionConfig, SessionError,
};
use chronicle::trace::{load_trace, load_trace_lenient, persist_trace, EventType, Trace, TraceError};
use chronicle::workload::{AgentSpec, Answer, TaskSpec};

const POLICIES: [&str; 8] = [
    "blocking",
    "naive",
    "cumulative",
    "multiples:4",
    "multiples:3:categorical",
    "overlay:3:ordinal",
    "overlay:4:categorical",
    "animation:1",
];

fn config(policy: &str, agent: AgentSpec, seed: u64) -> SessionConfig {
    SessionConfig::new(
        policy.parse().unwrap(),
        LatencyProfile::Uniform { lo: 0.0, hi: 5.0 },
        TaskSpec::threshold(60.0),
        seed,
    )
    .with_agent(agent)
}

fn agent(seed: u64) -> AgentSpec {
    if seed % 3 == 0 {
        AgentSpec::serial(0.5)
    } else {
        AgentSpec::eager(0.2 + 0.1 * (seed % 5) as f64)
    }
}

#[test]
fn identical_seed_and_config_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    for (i, policy) in POLICIES.iter().enumerate() {
        let cfg = config(policy, agent(i as u64), 40 + i as u64);
        let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        run_simulation_to(&cfg, &a).unwrap();
        run_simulation_to(&cfg, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), "{policy}");
    }
}

#[test]
fn different_seeds_give_different_sessions() {
    let a = run_simulation(&config("naive", AgentSpec::eager(0.5), 1)).unwrap().trace;
    let b = run_simulation(&config("naive", AgentSpec::eager(0.5), 2)).unwrap().trace;
    assert_ne!(a.to_jsonl(), b.to_jsonl());
}

#[test]
fn every_simulated_trace_replays() {
    for seed in 0..100u64 {
        let policy = POLICIES[seed as usize % POLICIES.len()];
        let trace = run_simulation(&config(policy, agent(seed), seed)).unwrap().trace;
        let history = replay(&trace).unwrap_or_else(|e| panic!("{policy} seed {seed}: {e}"));
        assert_eq!(history, directive_events(&trace));
    }
}

#[test]
fn parity_rerun_reproduces_directives() {
    for seed in 0..24u64 {
        let policy = POLICIES[seed as usize % POLICIES.len()];
        let original = run_simulation(&config(policy, AgentSpec::eager(0.3), seed)).unwrap().trace;
        let rerun = run_simulation(&parity_config(&original).unwrap()).unwrap().trace;
        assert_eq!(directive_events(&original), directive_events(&rerun), "{policy} seed {seed}");
    }
}

#[test]
fn trace_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let trace = run_simulation(&config("overlay:3:ordinal", AgentSpec::eager(0.5), 3)).unwrap().trace;
    persist_trace(&trace, &path).unwrap();
    assert_eq!(load_trace(&path).unwrap(), trace);
}

#[test]
fn truncated_final_line_loads_leniently() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let trace = run_simulation(&config("naive", AgentSpec::eager(0.5), 4)).unwrap().trace;
    let text = trace.to_jsonl();
    let cut = text.trim_end().rfind('\n').unwrap() + 10;
    std::fs::write(&path, &text[..cut]).unwrap();
    assert!(matches!(load_trace(&path), Err(TraceError::Parse { .. })));
    let (partial, err) = load_trace_lenient(&path).unwrap();
    assert_eq!(partial.events, trace.events[..trace.events.len() - 1]);
    assert!(matches!(err, Some(TraceError::Parse { line, .. }) if line == trace.events.len()));
}

#[test]
fn tampering_is_located() {
    let mut trace = run_simulation(&config("multiples:4", AgentSpec::eager(0.5), 5)).unwrap().trace;
    let pos = trace.events.iter().position(|e| e.kind == EventType::Evicted).unwrap();
    trace.events.remove(pos);
    match replay(&trace) {
        Err(SessionError::Divergence { index, .. }) => assert_eq!(index, pos),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn blocking_eager_renders_only_the_latest_request() {
    for seed in 0..20 {
        let mut cfg = config("blocking", AgentSpec::eager(0.5), seed);
        cfg.latency = LatencyProfile::Fixed { d: 5.0 };
        let trace = run_simulation(&cfg).unwrap().trace;
        assert!(detect_mismatch(&trace).is_empty());
        // each render belongs to the latest hover; everything older was cancelled
        let mut latest = 0;
        for e in &trace.events {
            match e.kind {
                EventType::RequestIssued => latest = e.req_id.unwrap(),
                EventType::RenderApplied => assert_eq!(e.req_id, Some(latest), "seed {seed}"),
                _ => {}
            }
        }
        assert!(trace.of_kind(EventType::Cancelled).count() > 0);
    }
}

#[test]
fn stuck_script_is_reported_not_hung() {
    let mut cfg = config("naive", AgentSpec::scripted(vec![], None), 0);
    cfg.latency = LatencyProfile::Fixed { d: 1.0 };
    assert!(matches!(run_simulation(&cfg), Err(SessionError::Stuck { .. })));
}

/// Drives a live session on a virtual wall clock: the client hovers at the
/// given times and the host polls at every due time in between.
fn drive_live(cfg: SessionConfig, hovers: &[(f64, &str)], submit_at: f64) -> (Vec<ServerMessage>, Trace) {
    let mut live = LiveSession::new();
    let origin = 100.0;
    let mut out = live.handle_client_message(ClientMessage::Hello { config: Some(cfg) }, origin);
    let run_until = |live: &mut LiveSession, out: &mut Vec<ServerMessage>, t: f64| {
        while let Some(due) = live.next_due().filter(|d| *d <= t) {
            out.extend(live.poll(due));
        }
    };
    for (t, target) in hovers {
        run_until(&mut live, &mut out, origin + t);
        out.extend(live.handle_client_message(
            ClientMessage::Interact {
                target: target.to_string(),
                client_time: None,
            },
            origin + t,
        ));
    }
    run_until(&mut live, &mut out, origin + submit_at);
    out.extend(live.handle_client_message(
        ClientMessage::SubmitAnswer {
            answer: Answer::Exists(false),
        },
        origin + submit_at,
    ));
    (out, live.trace().unwrap().clone())
}

#[test]
fn live_session_matches_its_headless_rerun() {
    let hovers = [(0.0, "Jan"), (0.4, "Feb"), (0.9, "Mar"), (1.0, "Apr"), (2.5, "May"), (2.6, "Jun")];
    for policy in POLICIES {
        let mut cfg = config(policy, AgentSpec::eager(0.5), 17);
        cfg.agent = None;
        let (messages, trace) = drive_live(cfg, &hovers, 12.0);
        assert!(matches!(messages.first(), Some(ServerMessage::ConfigAck { .. })));
        assert!(matches!(messages.last(), Some(ServerMessage::Summary { .. })));
        let streamed: Vec<_> = messages
            .iter()
            .filter_map(|m| match m {
                ServerMessage::Render { directive } => Some(directive.kind),
                _ => None,
            })
            .collect();
        let logged = directive_events(&trace);
        assert_eq!(streamed.len(), logged.len(), "{policy}");
        assert!(streamed.iter().any(|k| *k == DirectiveKind::SpinnerOn));

        replay(&trace).unwrap();
        let rerun = run_simulation(&parity_config(&trace).unwrap()).unwrap().trace;
        assert_eq!(directive_events(&rerun), logged, "{policy}");
    }
}

#[test]
fn live_session_refuses_agents_and_unknown_facets() {
    let mut live = LiveSession::new();
    let reply = live.handle_client_message(
        ClientMessage::Hello {
            config: Some(config("naive", AgentSpec::eager(0.5), 1)),
        },
        0.0,
    );
    assert!(matches!(&reply[..], [ServerMessage::Error { code, .. }] if code == "config"));
    let mut cfg = config("naive", AgentSpec::eager(0.5), 1);
    cfg.agent = None;
    live.handle_client_message(ClientMessage::Hello { config: Some(cfg) }, 0.0);
    let reply = live.handle_text(r#"{"type":"interact","target":"Smarch"}"#, 1.0);
    assert!(matches!(&reply[..], [ServerMessage::Error { code, .. }] if code == "unknown_facet"));
    assert_eq!(PolicySpec::Naive.to_string(), "naive");
}
