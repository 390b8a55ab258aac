use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chronicle::analytics::stats::{
    holm_bonferroni, median_ci, wilcoxon_rank_sum, wilcoxon_signed_rank, HypothesisTestResult, MedianCi, TestMode,
};
use chronicle::analytics::{clean_mask, compute_metrics, CleanReport, MetricReport, ParticipantTrace, DEFAULT_FLASH_WINDOW};
use chronicle::trace::{load_trace, Trace};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

const METRICS: [&str; 6] = [
    "completion_time",
    "accuracy",
    "concurrency_fraction",
    "out_of_order_count",
    "mismatch_count",
    "flashing_count",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TestKind {
    SignedRank,
    RankSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Correction {
    Holm,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Trace files, or directories of `.jsonl` traces.
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Drop unreliable participants, slow assignments and idle assignments.
    #[arg(long)]
    clean: bool,
    /// Comma-separated metrics to report and compare.
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<String>,
    /// Two condition labels (policy names) to compare.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    compare: Option<Vec<String>>,
    #[arg(long, value_enum, default_value_t = TestKind::SignedRank)]
    test: TestKind,
    /// exact | approx | auto
    #[arg(long, default_value = "auto")]
    mode: TestMode,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = Correction::None)]
    correction: Correction,
    /// Renders on one slot closer than this many seconds count as flashing.
    #[arg(long, default_value_t = DEFAULT_FLASH_WINDOW)]
    flash_window: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Debug, Serialize)]
struct Row {
    path: PathBuf,
    participant: String,
    condition: String,
    metrics: MetricReport,
}

#[derive(Debug, Serialize)]
struct ConditionSummary {
    condition: String,
    n: usize,
    medians: BTreeMap<String, MedianCi>,
}

#[derive(Debug, Serialize)]
struct Comparison {
    metric: String,
    a: String,
    b: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<HypothesisTestResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reject: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn metric_value(m: &MetricReport, name: &str) -> f64 {
    match name {
        "completion_time" => m.completion_time,
        "accuracy" => f64::from(u8::from(m.accuracy)),
        "concurrency_fraction" => m.concurrency_fraction,
        "out_of_order_count" => m.out_of_order_count as f64,
        "mismatch_count" => m.mismatch_count as f64,
        "flashing_count" => m.flashing_count as f64,
        other => unreachable!("unchecked metric {other}"),
    }
}

fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn participant_of(path: &Path, trace: &Trace) -> String {
    trace
        .config()
        .and_then(|c| c.participant.clone())
        .unwrap_or_else(|| path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()))
}

fn condition_of(trace: &Trace) -> String {
    trace.config().map_or_else(|| "unknown".to_string(), |c| c.policy.to_string())
}

pub fn run(args: AnalyzeArgs) -> Result<()> {
    let metrics: Vec<String> = if args.metrics.is_empty() {
        METRICS.iter().map(|m| m.to_string()).collect()
    } else {
        args.metrics.clone()
    };
    if let Some(bad) = metrics.iter().find(|m| !METRICS.contains(&m.as_str())) {
        bail!("unknown metric `{bad}`; expected one of {}", METRICS.join(", "));
    }

    let mut loaded = Vec::new();
    for path in expand(&args.paths)? {
        let trace = load_trace(&path).with_context(|| format!("loading {}", path.display()))?;
        loaded.push((path, trace));
    }
    let mut clean_report: Option<CleanReport> = None;
    if args.clean {
        let traces: Vec<ParticipantTrace> = loaded
            .iter()
            .map(|(path, trace)| ParticipantTrace::new(participant_of(path, trace), trace.clone()))
            .collect();
        let (keep, report) = clean_mask(&traces);
        clean_report = Some(report);
        loaded = loaded.into_iter().zip(keep).filter(|(_, k)| *k).map(|(l, _)| l).collect();
    }

    let mut rows = Vec::new();
    for (path, trace) in &loaded {
        rows.push(Row {
            participant: participant_of(path, trace),
            condition: condition_of(trace),
            metrics: compute_metrics(trace, args.flash_window)?,
            path: path.clone(),
        });
    }

    let mut by_condition: BTreeMap<String, Vec<&Row>> = BTreeMap::new();
    for row in &rows {
        by_condition.entry(row.condition.clone()).or_default().push(row);
    }
    let mut summaries = Vec::new();
    for (condition, members) in &by_condition {
        let mut medians = BTreeMap::new();
        for m in &metrics {
            let values: Vec<f64> = members.iter().map(|r| metric_value(&r.metrics, m)).collect();
            medians.insert(m.clone(), median_ci(&values, 0.95)?);
        }
        summaries.push(ConditionSummary {
            condition: condition.clone(),
            n: members.len(),
            medians,
        });
    }

    let mut comparisons = Vec::new();
    if let Some(pair) = &args.compare {
        let (a, b) = (&pair[0], &pair[1]);
        for label in [a, b] {
            if !by_condition.contains_key(label) {
                bail!("no traces for condition `{label}`");
            }
        }
        for m in &metrics {
            let result = match args.test {
                TestKind::RankSum => {
                    let xs: Vec<f64> = by_condition[a].iter().map(|r| metric_value(&r.metrics, m)).collect();
                    let ys: Vec<f64> = by_condition[b].iter().map(|r| metric_value(&r.metrics, m)).collect();
                    wilcoxon_rank_sum(&xs, &ys, args.mode)
                }
                TestKind::SignedRank => {
                    let pairs = paired_means(&by_condition[a], &by_condition[b], m);
                    if pairs.is_empty() {
                        Err(chronicle::analytics::AnalyticsError::DegenerateSample(
                            "no participant appears in both conditions".into(),
                        ))
                    } else {
                        wilcoxon_signed_rank(&pairs, args.mode)
                    }
                }
            };
            comparisons.push(match result {
                Ok(r) => Comparison {
                    metric: m.clone(),
                    a: a.clone(),
                    b: b.clone(),
                    result: Some(r),
                    threshold: None,
                    reject: None,
                    error: None,
                },
                Err(e) => Comparison {
                    metric: m.clone(),
                    a: a.clone(),
                    b: b.clone(),
                    result: None,
                    threshold: None,
                    reject: None,
                    error: Some(e.to_string()),
                },
            });
        }
        let tested: Vec<usize> = (0..comparisons.len()).filter(|i| comparisons[*i].result.is_some()).collect();
        if !tested.is_empty() {
            let pvals: Vec<f64> = tested.iter().map(|i| comparisons[*i].result.as_ref().map_or(1.0, |r| r.p)).collect();
            match args.correction {
                Correction::Holm => {
                    let holm = holm_bonferroni(&pvals, args.alpha)?;
                    for (rank, &idx) in holm.order.iter().enumerate() {
                        comparisons[tested[idx]].threshold = Some(holm.thresholds[rank]);
                    }
                    for (k, &i) in tested.iter().enumerate() {
                        comparisons[i].reject = Some(holm.reject[k]);
                    }
                }
                Correction::None => {
                    for (k, &i) in tested.iter().enumerate() {
                        comparisons[i].threshold = Some(args.alpha);
                        comparisons[i].reject = Some(pvals[k] <= args.alpha);
                    }
                }
            }
        }
    }

    match args.format {
        Format::Json => {
            let report = json!({
                "traces": rows,
                "clean": clean_report,
                "conditions": summaries,
                "comparisons": comparisons,
            });
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Format::Table => print_tables(&rows, &metrics, clean_report.as_ref(), &summaries, &comparisons),
    }
    Ok(())
}

/// Per-participant means of `metric` in each condition, for participants
/// seen in both.
fn paired_means(a: &[&Row], b: &[&Row], metric: &str) -> Vec<(f64, f64)> {
    let means = |rows: &[&Row]| {
        let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
        for r in rows {
            let e = acc.entry(r.participant.as_str()).or_default();
            e.0 += metric_value(&r.metrics, metric);
            e.1 += 1;
        }
        acc.into_iter()
            .map(|(p, (sum, n))| (p.to_string(), sum / n as f64))
            .collect::<BTreeMap<String, f64>>()
    };
    let (ma, mb) = (means(a), means(b));
    ma.iter()
        .filter_map(|(p, x)| mb.get(p).map(|y| (*x, *y)))
        .collect()
}

fn table(header: &[&str], body: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<String>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = vec![line(header.iter().map(|h| h.to_string()).collect())];
    out.push(line(widths.iter().map(|w| "-".repeat(*w)).collect()));
    out.extend(body.iter().map(|r| line(r.clone())));
    out.join("\n")
}

fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x:.0}")
    } else {
        format!("{x:.4}")
    }
}

fn print_tables(
    rows: &[Row],
    metrics: &[String],
    clean: Option<&CleanReport>,
    summaries: &[ConditionSummary],
    comparisons: &[Comparison],
) {
    let mut header = vec!["trace", "participant", "condition"];
    header.extend(metrics.iter().map(String::as_str));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.path.display().to_string(), r.participant.clone(), r.condition.clone()];
            cells.extend(metrics.iter().map(|m| fmt_num(metric_value(&r.metrics, m))));
            cells
        })
        .collect();
    println!("{}", table(&header, &body));

    if let Some(c) = clean {
        println!();
        println!(
            "cleaning: {} majority-wrong, {} too long, {} without interaction, {} kept",
            c.majority_wrong, c.too_long, c.no_interaction, c.kept
        );
    }

    println!();
    let mut header = vec!["condition", "n"];
    header.extend(metrics.iter().map(String::as_str));
    let body: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            let mut cells = vec![s.condition.clone(), s.n.to_string()];
            cells.extend(metrics.iter().map(|m| {
                let ci = &s.medians[m];
                format!("{} [{}, {}]", fmt_num(ci.median), fmt_num(ci.lo), fmt_num(ci.hi))
            }));
            cells
        })
        .collect();
    println!("{}", table(&header, &body));

    if !comparisons.is_empty() {
        println!();
        let header = ["metric", "a", "b", "test", "statistic", "z", "p", "threshold", "reject"];
        let body: Vec<Vec<String>> = comparisons
            .iter()
            .map(|c| match &c.result {
                Some(r) => vec![
                    c.metric.clone(),
                    c.a.clone(),
                    c.b.clone(),
                    format!("{}{}", r.method, if r.exact { " (exact)" } else { "" }),
                    fmt_num(r.statistic),
                    r.z.map_or("-".into(), |z| format!("{z:.4}")),
                    format!("{:.6}", r.p),
                    c.threshold.map_or("-".into(), |t| format!("{t:.6}")),
                    c.reject.map_or("-".into(), |x| x.to_string()),
                ],
                None => vec![
                    c.metric.clone(),
                    c.a.clone(),
                    c.b.clone(),
                    c.error.clone().unwrap_or_default(),
                    "-".into(),
                    "-".into(),
                    "-".into(),
                    "-".into(),
                    "-".into(),
                ],
            })
            .collect();
        println!("{}", table(&header, &body));
    }
}
