//! Command-line front end for the `attrgraph` library.

mod args;
mod manifest;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use attrgraph::augment::{build_transition, sparsify_graph};
use attrgraph::eval::classify::classify;
use attrgraph::eval::report::{ablation_csv, sweep_csv, sweep_reports, to_jsonl};
use attrgraph::eval::{ablation, robustness_sweep, topn_sweep, MetricReport};
use attrgraph::gradcheck::{self, Fault, GradcheckConfig};
use attrgraph::snapshot::Snapshot;
use attrgraph::training::{train_with, EpochMetrics, Task, TrainConfig, TrainedModel};
use attrgraph::{load_graph, AttributedGraph, Error};
use clap::Parser;
use serde::Serialize;

pub use args::Cli;
use args::{Command, ConfigArgs, DataArgs, DumpArgs, EvalArgs, GradcheckArgs, PerturbArgs, TopnArgs, TrainArgs};
pub use manifest::{sha256_file, InputDigest, RunManifest, Timings};

pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.csv";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const REPORT_FILE: &str = "report.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    /// A check ran to completion and reported a failure.
    Failed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Failed(msg) => f.write_str(msg),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// 2 for unreadable inputs and bad configuration, 1 for everything else.
pub fn exit_code(err: &CliError) -> i32 {
    match err {
        CliError::Core(
            Error::Io { .. } | Error::Parse { .. } | Error::Config(_) | Error::Compatibility(_),
        ) => 2,
        _ => 1,
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Ablate(a) => cmd_ablate(&a),
        Command::PerturbSweep(a) => cmd_perturb(&a),
        Command::TopnSweep(a) => cmd_topn(&a),
        Command::Gradcheck(a) => cmd_gradcheck(&a),
        Command::DumpOperator(a) => cmd_dump(&a),
    }
}

fn load(data: &DataArgs) -> CliResult<AttributedGraph> {
    Ok(load_graph(&data.edges, &data.features, data.labels.as_deref())?)
}

/// Config file first, then flags, then `--set` overrides.
pub fn resolve_config(args: &ConfigArgs) -> attrgraph::Result<TrainConfig> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        pairs.extend(TrainConfig::parse_text(&text)?);
    }
    let mut flag = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            pairs.push((k.to_string(), v));
        }
    };
    flag("seed", args.seed.map(|v| v.to_string()));
    flag("alpha", args.alpha.map(|v| v.to_string()));
    flag("k", args.k.map(|v| v.to_string()));
    flag("dim", args.dim.map(|v| v.to_string()));
    flag("topn", args.topn.clone());
    flag("variant", args.variant.clone());
    flag("task", args.task.clone());
    flag("epochs", args.epochs.map(|v| v.to_string()));
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects key=value, got `{kv}`")))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    TrainConfig::from_pairs(pairs.iter().map(|(k, v)| (k.as_str(), v.as_str())))
}

fn config_map(cfg: &TrainConfig) -> BTreeMap<String, String> {
    cfg.to_pairs().into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::Core(Error::io(path, e)))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::Core(Error::io(path, e)))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

#[derive(Serialize)]
struct EpochLine {
    epoch: usize,
    loss: f64,
    val_auc: f64,
    val_ap: f64,
}

/// Per-epoch log without wall-clock time, so identical runs match byte for byte.
pub fn metrics_log(history: &[EpochMetrics]) -> String {
    let mut out = String::new();
    for e in history {
        out.push_str(&to_json(&EpochLine {
            epoch: e.epoch,
            loss: e.loss,
            val_auc: e.val_auc,
            val_ap: e.val_ap,
        }));
        out.push('\n');
    }
    out
}

pub fn embeddings_csv(model: &TrainedModel) -> attrgraph::Result<String> {
    let emb = model.node_embeddings()?;
    let mut out = String::from("node");
    for t in 0..emb.cols() {
        let _ = write!(out, ",d{t}");
    }
    out.push('\n');
    for v in 0..emb.rows() {
        out.push_str(&v.to_string());
        for x in emb.row(v) {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    Ok(out)
}

fn evaluation_reports(
    model: &TrainedModel,
    graph: &AttributedGraph,
    task: Task,
    folds: usize,
) -> CliResult<Vec<MetricReport>> {
    let cfg = &model.cfg;
    match task {
        Task::Lp => {
            if model.split.test_pos.is_empty() {
                return Err(Error::Config(
                    "model was trained without held-out test edges; use --task nc".into(),
                )
                .into());
            }
            let (auc, ap) = model.test_metrics()?;
            Ok(vec![
                MetricReport::new("lp", "auc", auc, cfg),
                MetricReport::new("lp", "ap", ap, cfg),
            ])
        }
        Task::Nc => {
            let labels = graph
                .labels()
                .ok_or_else(|| Error::Config("node classification needs --labels".into()))?;
            let (micro, macro_) = classify(&model.node_embeddings()?, labels, folds, cfg.seed)?;
            Ok(vec![
                MetricReport::new("nc", "f1_micro", micro, cfg),
                MetricReport::new("nc", "f1_macro", macro_, cfg),
            ])
        }
    }
}

fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let start = Instant::now();
    let graph = load(&args.data)?;
    let cfg = resolve_config(&args.config)?;
    if cfg.task == Task::Nc && graph.labels().is_none() {
        return Err(Error::Config("node classification needs --labels".into()).into());
    }
    create_dir(&args.out_dir)?;
    let model = train_with(&graph, &cfg, &mut |m| {
        if !args.quiet {
            println!("{}", to_json(m));
        }
    })?;
    let reports = evaluation_reports(&model, &graph, cfg.task, 5)?;

    let out = |name: &str| args.out_dir.join(name);
    Snapshot::from_model(&model).write(&out(SNAPSHOT_FILE))?;
    write_file(&out(EMBEDDINGS_FILE), &embeddings_csv(&model)?)?;
    write_file(&out(METRICS_FILE), &metrics_log(&model.history))?;
    let report_text = to_jsonl(&reports);
    write_file(&out(REPORT_FILE), &report_text)?;
    print!("{report_text}");

    let mut manifest = RunManifest {
        command: "train".into(),
        config: config_map(&cfg),
        seed: cfg.seed,
        inputs: BTreeMap::new(),
        artifacts: [
            ("snapshot", SNAPSHOT_FILE),
            ("embeddings", EMBEDDINGS_FILE),
            ("metrics", METRICS_FILE),
            ("report", REPORT_FILE),
        ]
        .into_iter()
        .map(|(k, f)| (k.to_string(), out(f)))
        .collect(),
        timings: Timings {
            total_seconds: 0.0,
            epoch_seconds: model.history.iter().map(|e| e.seconds).collect(),
        },
    };
    manifest.add_input("edges", &args.data.edges)?;
    manifest.add_input("features", &args.data.features)?;
    if let Some(p) = &args.data.labels {
        manifest.add_input("labels", p)?;
    }
    if let Some(p) = &args.config.config {
        manifest.add_input("config", p)?;
    }
    manifest.timings.total_seconds = start.elapsed().as_secs_f64();
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&out(MANIFEST_FILE), &text)
}

fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    let graph = load(&args.data)?;
    let snap = Snapshot::read(&args.snapshot)?;
    snap.check_compatible(args.dim, args.k, args.alpha)?;
    let model = snap.restore(&graph)?;
    let task = match &args.task {
        Some(t) => Task::from_str(t)?,
        None => model.cfg.task,
    };
    print!("{}", to_jsonl(&evaluation_reports(&model, &graph, task, args.folds)?));
    Ok(())
}

fn cmd_ablate(args: &TrainArgs) -> CliResult<()> {
    let graph = load(&args.data)?;
    let cfg = resolve_config(&args.config)?;
    create_dir(&args.out_dir)?;
    let rows = ablation(&graph, &cfg)?;
    let json = serde_json::to_string_pretty(&rows).expect("rows serialize");
    write_file(&args.out_dir.join("ablation.json"), &json)?;
    let csv = ablation_csv(&rows);
    write_file(&args.out_dir.join("ablation.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn write_sweep(out_dir: &Path, label: &str, rows: &[attrgraph::eval::SweepRow], cfg: &TrainConfig) -> CliResult<()> {
    let csv = sweep_csv(label, rows);
    write_file(&out_dir.join(format!("{label}.csv")), &csv)?;
    write_file(
        &out_dir.join(format!("{label}.jsonl")),
        &to_jsonl(&sweep_reports(label, rows, cfg)),
    )?;
    print!("{csv}");
    Ok(())
}

fn cmd_perturb(args: &PerturbArgs) -> CliResult<()> {
    let graph = load(&args.train.data)?;
    let cfg = resolve_config(&args.train.config)?;
    create_dir(&args.train.out_dir)?;
    let rows = robustness_sweep(&graph, &cfg, &args.ratios)?;
    write_sweep(&args.train.out_dir, "ratio", &rows, &cfg)
}

fn cmd_topn(args: &TopnArgs) -> CliResult<()> {
    let graph = load(&args.train.data)?;
    let cfg = resolve_config(&args.train.config)?;
    create_dir(&args.train.out_dir)?;
    let rows = topn_sweep(&graph, &cfg, &args.values)?;
    write_sweep(&args.train.out_dir, "topn", &rows, &cfg)
}

fn cmd_gradcheck(args: &GradcheckArgs) -> CliResult<()> {
    let defaults = GradcheckConfig::default();
    let cfg = GradcheckConfig {
        instances: args.instances,
        max_nodes: args.max_nodes,
        max_attributes: args.max_attributes,
        dims: args.dim.map_or(defaults.dims, |d| d..=d),
        depths: args.depth.map_or(defaults.depths, |k| k..=k),
        seed: args.seed,
        fault: args.inject_sign_flip.then_some(Fault::ScorerSignFlip),
    };
    if cfg.instances == 0 || cfg.dims.is_empty() || *cfg.dims.start() == 0 || cfg.max_nodes < 2 {
        return Err(Error::Config("gradcheck needs instances ≥ 1, d ≥ 1 and max-nodes ≥ 2".into()).into());
    }
    let start = Instant::now();
    let report = gradcheck::run(&cfg)?;
    for c in report.worst_by_suite() {
        println!(
            "{:<11} max rel error {:.3e}  threshold {:.0e}  {}",
            c.suite,
            c.rel_error,
            c.threshold,
            if c.passed() { "ok" } else { "FAIL" }
        );
    }
    println!(
        "{} checks on {} instances in {:.2}s",
        report.checks.len(),
        cfg.instances,
        start.elapsed().as_secs_f64()
    );
    let failures: Vec<String> = report
        .failures()
        .map(|c| {
            format!(
                "{} instance {} parameter {}: rel error {:.3e} >= {:.0e}",
                c.suite, c.instance, c.param, c.rel_error, c.threshold
            )
        })
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("gradient check failed\n  {}", failures.join("\n  "))))
    }
}

fn cmd_dump(args: &DumpArgs) -> CliResult<()> {
    let graph = load(&args.data)?;
    let cfg = resolve_config(&args.config)?;
    let graph = match cfg.topn {
        Some(keep) => sparsify_graph(&graph, keep)?,
        None => graph,
    };
    let op = build_transition(graph.adjacency(), graph.features(), cfg.effective_alpha())?;
    let mut out = String::from("row,col,value\n");
    for (r, c, v) in op.transition().triplets() {
        let _ = writeln!(out, "{r},{c},{v}");
    }
    match &args.out {
        Some(path) => write_file(path, &out),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

/// Artifact paths of a finished `train` run.
pub fn artifact_paths(out_dir: &Path) -> [PathBuf; 4] {
    [SNAPSHOT_FILE, EMBEDDINGS_FILE, METRICS_FILE, REPORT_FILE].map(|f| out_dir.join(f))
}
