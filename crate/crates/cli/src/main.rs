//! `chronicle` command-line tool: headless simulations, trace analysis,
//! replay verification and the live session server.

mod analyze;
mod serve;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chronicle::chronicle::PolicySpec;
use chronicle::latency::LatencyProfile;
use chronicle::session::{
    directive_events, parity_config, replay, run_simulation, run_simulation_to, Pace, SessionConfig, SessionError,
};
use chronicle::trace::{load_trace, TraceEvent};
use chronicle::workload::{AgentSpec, GenerationParams, TaskSpec};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "chronicle", version, about = "Asynchronous rendering sessions: simulate, analyze, serve, replay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run agent-driven sessions and write their traces.
    Simulate(SimulateArgs),
    /// Compute metrics and statistical comparisons over traces.
    Analyze(analyze::AnalyzeArgs),
    /// Host live sessions over WebSocket.
    Serve(ServeArgs),
    /// Rebuild the render history of a trace.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// blocking | naive | cumulative | multiples:K | overlay:K:ordinal | overlay:K:categorical | animation:DWELL
    #[arg(long)]
    policy: PolicySpec,
    /// none | fixed:S | uniform:LO,HI | trace:PATH
    #[arg(long, value_parser = parse_latency)]
    latency: LatencyProfile,
    /// threshold:CUT | maximum | trend
    #[arg(long)]
    task: TaskSpec,
    /// serial:THINK | eager:THINK
    #[arg(long)]
    agent: AgentSpec,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace file, or a directory when --runs is given.
    #[arg(long)]
    out: PathBuf,
    /// Number of sessions, with seeds SEED, SEED+1, ...
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long)]
    participant: Option<String>,
    /// Share of threshold assignments with a facet above the cutoff.
    #[arg(long)]
    positive_rate: Option<f64>,
    /// Pace the session against the wall clock.
    #[arg(long)]
    realtime: bool,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Port to listen on; 0 picks a free port.
    #[arg(long, default_value_t = 8765)]
    port: u16,
    /// Session config used when a client's hello carries none.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the traces of finished sessions.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    path: PathBuf,
    /// Only check the trace, printing a verdict instead of the history.
    #[arg(long)]
    verify: bool,
    /// Also re-run the session headless from its recorded hovers and delays.
    #[arg(long)]
    parity: bool,
}

fn parse_latency(s: &str) -> Result<LatencyProfile, String> {
    LatencyProfile::parse(s).map_err(|e| e.to_string())
}

fn error_code(err: &anyhow::Error) -> &'static str {
    if let Some(e) = err.downcast_ref::<SessionError>() {
        return e.code();
    }
    if err.downcast_ref::<chronicle::trace::TraceError>().is_some() {
        return "trace";
    }
    if err.downcast_ref::<chronicle::analytics::AnalyticsError>().is_some() {
        return "analytics";
    }
    if err.downcast_ref::<std::io::Error>().is_some() {
        return "io";
    }
    "cli"
}

/// The error chain joined by `: `, skipping causes already quoted by their
/// parent's message.
fn describe(err: &anyhow::Error) -> String {
    let mut parts: Vec<String> = Vec::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !parts.last().is_some_and(|prev| prev.ends_with(&text)) {
            parts.push(text);
        }
    }
    parts.join(": ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Analyze(args) => analyze::run(args),
        Command::Serve(args) => serve_cmd(args),
        Command::Replay(args) => replay_cmd(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let report = json!({"error": {"code": error_code(&err), "message": describe(&err)}});
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut config = SessionConfig::new(args.policy, args.latency, args.task, args.seed).with_agent(args.agent);
    config.participant = args.participant;
    if let Some(rate) = args.positive_rate {
        config.generation = GenerationParams {
            positive_rate: rate,
            ..GenerationParams::default()
        };
    }
    if args.realtime {
        config.pace = Pace::Realtime;
    }
    config.validate()?;
    let mut stdout = std::io::stdout().lock();
    match args.runs {
        None => {
            let out = run_simulation_to(&config, &args.out)?;
            writeln!(stdout, "{}", serde_json::to_string(&out.summary)?)?;
        }
        Some(runs) => {
            std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
            for i in 0..runs {
                let mut run = config.clone();
                run.seed = args.seed.wrapping_add(i);
                let path = args.out.join(format!("run-{}.jsonl", run.seed));
                let out = run_simulation_to(&run, &path)?;
                writeln!(stdout, "{}", serde_json::to_string(&out.summary)?)?;
            }
        }
    }
    Ok(())
}

fn load_config(path: &Path) -> Result<SessionConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config: SessionConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing session config {}", path.display()))?;
    config.validate()?;
    Ok(config)
}

fn serve_cmd(args: ServeArgs) -> Result<()> {
    let default_config = args.config.as_deref().map(load_config).transpose()?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(serve::serve(args.port, default_config, args.out))
}

/// First position where two directive streams differ in kind, request,
/// target, slot or encoding, or in time beyond rounding.
fn same_directives(a: &[TraceEvent], b: &[TraceEvent]) -> Option<usize> {
    let key = |e: &TraceEvent| (e.kind, e.req_id, e.target.clone(), e.slot, e.encoding);
    let n = a.len().max(b.len());
    (0..n).find(|&i| match (a.get(i), b.get(i)) {
        (Some(x), Some(y)) => key(x) != key(y) || (x.t - y.t).abs() > 1e-9,
        _ => true,
    })
}

fn replay_cmd(args: ReplayArgs) -> Result<()> {
    let trace = load_trace(&args.path).with_context(|| format!("loading {}", args.path.display()))?;
    let history = replay(&trace)?;
    let mut report = json!({"path": args.path, "verified": true, "directives": history.len()});
    if args.parity {
        let rerun = run_simulation(&parity_config(&trace)?)?;
        let logged = directive_events(&trace);
        let headless = directive_events(&rerun.trace);
        if let Some(i) = same_directives(&logged, &headless) {
            bail!(SessionError::Divergence {
                index: i,
                logged: logged.get(i).map_or("nothing".into(), |e| format!("{e:?}")),
                replayed: headless.get(i).map_or("nothing".into(), |e| format!("{e:?}")),
            });
        }
        report["parity"] = json!(true);
    }
    if !args.verify {
        report["history"] = serde_json::to_value(&history)?;
    }
    println!("{report}");
    Ok(())
}
