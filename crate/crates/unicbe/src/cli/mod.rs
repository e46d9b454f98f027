//! Command-line front end: `run`, `ingest`, `savings` and `verify`.
//!
//! Everything here is callable as a library; the `unicbe` binary only parses
//! arguments and maps [`CliError::exit_code`] to the process status.

mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::judges::{IngestError, ReplayDataset};
use crate::metrics::{budget_savings, MetricKind};
use crate::scenarios::{self, JudgeSpec, ScenarioConfig, ScenarioError};

pub use output::{
    fmt_sig, read_curves, write_curves, write_manifest, write_scores, CurveRow, RunManifest, CURVES_FILE,
    MANIFEST_FILE, SCORES_FILE,
};

#[derive(Debug, Parser)]
#[command(name = "unicbe", version, about = "Budget allocation for comparing-based model evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scenario described by a config (or a previous manifest).
    Run(RunArgs),
    /// Summarize (and optionally re-export) a JSONL preference log.
    Ingest(IngestArgs),
    /// Budget savings of one strategy's mean curve over another's.
    Savings(SavingsArgs),
    /// Check that balanced counts uniquely minimize the expected squared error.
    Verify(VerifyArgs),
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads for seeds; defaults to the available cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Replaces the first seed of the configured list.
    #[arg(long, env = "UNICBE_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Jsonl,
}

#[derive(Debug, clap::Args)]
pub struct IngestArgs {
    pub path: PathBuf,
    #[arg(long, value_enum, default_value_t = InputFormat::Jsonl)]
    pub format: InputFormat,
    /// Write the canonical record log here.
    #[arg(long)]
    pub export: Option<PathBuf>,
    /// Print the summary as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, clap::Args)]
pub struct SavingsArgs {
    /// curves.csv of the method.
    pub curves_a: PathBuf,
    /// curves.csv of the baseline (may be the same file).
    pub curves_b: PathBuf,
    /// Strategy label in the first file; needed when it holds several.
    #[arg(long)]
    pub label_a: Option<String>,
    #[arg(long)]
    pub label_b: Option<String>,
    /// Metric(s) to compare; one table row per metric and target.
    #[arg(long, default_values_t = vec!["delta".to_string()])]
    pub metric: Vec<String>,
    #[arg(long, required = true)]
    pub target: Vec<f64>,
    /// Also write the table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct VerifyArgs {
    /// Number of categories.
    pub u: usize,
    /// Number of draws.
    pub v: u64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config at {field}: {message}")]
    Config { field: String, message: String },
    #[error("judge failure: {0}")]
    Judge(ScenarioError),
    #[error(transparent)]
    Scenario(ScenarioError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Input(String),
    #[error("verification failed for U={u}, V={v}")]
    VerifyFailed { u: usize, v: u64 },
}

impl CliError {
    /// 2 for config problems, 3 for judge failures, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Judge(_) => 3,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Config { field, message } => CliError::Config { field, message },
            e if e.is_judge_failure() => CliError::Judge(e),
            e => CliError::Scenario(e),
        }
    }
}

/// Runs one parsed command, writing human-readable output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Run(args) => cmd_run(args, out).map(|_| ()),
        Command::Ingest(args) => cmd_ingest(args, out),
        Command::Savings(args) => cmd_savings(args, out),
        Command::Verify(args) => cmd_verify(args.u, args.v, out),
    }
}

/// Reads a config, or the config echoed in a run manifest, and validates
/// it. Relative data paths are resolved against the file's directory.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = std::fs::canonicalize(path)
        .ok()
        .and_then(|p| p.parent().map(Path::to_path_buf));
    parse_config(&text, base.as_deref())
}

pub fn parse_config(text: &str, base: Option<&Path>) -> Result<ScenarioConfig, CliError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Config {
        field: ".".into(),
        message: e.to_string(),
    })?;
    let (value, prefix) = match value {
        serde_json::Value::Object(mut map) if map.contains_key("manifest_version") => {
            (map.remove("config").unwrap_or_default(), "config.")
        }
        v => (v, ""),
    };
    let mut cfg: ScenarioConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config {
            field: format!("{prefix}{path}"),
            message: e.into_inner().to_string(),
        }
    })?;
    if let Some(base) = base {
        resolve_paths(&mut cfg, base);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_paths(cfg: &mut ScenarioConfig, base: &Path) {
    let fix = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    match &mut cfg.judge {
        JudgeSpec::Replay { path } => fix(path),
        JudgeSpec::External { responses, .. } => fix(responses),
        JudgeSpec::Synthetic { .. } => {}
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs a config and writes `curves.csv`, `scores.json` and `manifest.json`
/// into `args.out_dir`.
pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<RunManifest, CliError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seeds = cfg.seeds.with_head(seed);
    }
    let started = Instant::now();
    let result = scenarios::run(&cfg, args.jobs.unwrap_or_else(default_jobs))?;
    let wall = started.elapsed().as_secs_f64();

    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let manifest = RunManifest::new(&cfg, dir, wall);
    write_curves(&dir.join(CURVES_FILE), &result)?;
    write_scores(&dir.join(SCORES_FILE), &result)?;
    write_manifest(&dir.join(MANIFEST_FILE), &manifest)?;

    let w = |e| CliError::io(Path::new("<stdout>"), e);
    for s in &result.strategies {
        let last = s.mean.last();
        writeln!(
            out,
            "{:<16} seeds {:>4}  T {:>6}  delta {:>10}  r_p {:>10}",
            s.label,
            s.runs.len(),
            last.map_or(0, |p| p.budget),
            last.map_or("-".into(), |p| fmt_sig(p.mean.delta)),
            last.map_or("-".into(), |p| fmt_sig(p.mean.r_p)),
        )
        .map_err(w)?;
    }
    writeln!(out, "wrote {} ({:.1}s)", dir.display(), wall).map_err(w)?;
    Ok(manifest)
}

pub fn cmd_ingest(args: &IngestArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let InputFormat::Jsonl = args.format;
    let ds = ReplayDataset::from_path(&args.path)?;
    let summary = ds.summary();
    let w = |e| CliError::io(Path::new("<stdout>"), e);
    if args.json {
        let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Input(e.to_string()))?;
        writeln!(out, "{text}").map_err(w)?;
    } else {
        writeln!(out, "{summary}").map_err(w)?;
    }
    if let Some(path) = &args.export {
        let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        let mut buf = std::io::BufWriter::new(file);
        ds.write_jsonl(&mut buf)
            .and_then(|_| buf.flush())
            .map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

/// One cell of the savings table; `None` when a curve never reaches the
/// target.
#[derive(Debug, Clone, PartialEq)]
pub struct SavingsRow {
    pub metric: MetricKind,
    pub target: f64,
    pub budget_a: Option<f64>,
    pub budget_b: Option<f64>,
    pub savings: Option<f64>,
}

pub fn savings_table(args: &SavingsArgs) -> Result<Vec<SavingsRow>, CliError> {
    let rows_a = read_curves(&args.curves_a)?;
    let rows_b = read_curves(&args.curves_b)?;
    let label_a = pick_label(&rows_a, args.label_a.as_deref(), &args.curves_a)?;
    let label_b = pick_label(&rows_b, args.label_b.as_deref(), &args.curves_b)?;
    let mut table = Vec::new();
    for name in &args.metric {
        let metric = MetricKind::from_name(name).ok_or_else(|| CliError::Input(format!("unknown metric {name:?}")))?;
        let a = output::mean_curve(&rows_a, &label_a, metric);
        let b = output::mean_curve(&rows_b, &label_b, metric);
        for &target in &args.target {
            table.push(SavingsRow {
                metric,
                target,
                budget_a: a.first_crossing(target),
                budget_b: b.first_crossing(target),
                savings: budget_savings(&a, &b, target).ok(),
            });
        }
    }
    Ok(table)
}

fn pick_label(rows: &[CurveRow], want: Option<&str>, path: &Path) -> Result<String, CliError> {
    let mut labels: Vec<&str> = rows.iter().map(|r| r.strategy.as_str()).collect();
    labels.sort_unstable();
    labels.dedup();
    match want {
        Some(w) if labels.contains(&w) => Ok(w.to_string()),
        Some(w) => Err(CliError::Input(format!(
            "{}: no strategy {w:?} (have {})",
            path.display(),
            labels.join(", ")
        ))),
        None if labels.len() == 1 => Ok(labels[0].to_string()),
        None => Err(CliError::Input(format!(
            "{}: holds {} strategies ({}); pick one with a label flag",
            path.display(),
            labels.len(),
            labels.join(", ")
        ))),
    }
}

fn cell(v: Option<f64>, suffix: &str) -> String {
    v.map_or("n/a".to_string(), |x| format!("{}{suffix}", fmt_sig(x)))
}

pub fn cmd_savings(args: &SavingsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let table = savings_table(args)?;
    let w = |e| CliError::io(Path::new("<stdout>"), e);
    writeln!(out, "{:<10} {:>12} {:>14} {:>14} {:>14}", "metric", "target", "budget_a", "budget_b", "savings_pct")
        .map_err(w)?;
    for r in &table {
        writeln!(
            out,
            "{:<10} {:>12} {:>14} {:>14} {:>14}",
            r.metric.name(),
            fmt_sig(r.target),
            cell(r.budget_a, ""),
            cell(r.budget_b, ""),
            cell(r.savings, "%"),
        )
        .map_err(w)?;
    }
    if let Some(path) = &args.csv {
        let mut wtr = csv::Writer::from_path(path).map_err(|e| CliError::Input(e.to_string()))?;
        let csv_err = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));
        wtr.write_record(["metric", "target", "budget_a", "budget_b", "savings_pct"])
            .map_err(csv_err)?;
        for r in &table {
            wtr.write_record([
                r.metric.name().to_string(),
                fmt_sig(r.target),
                cell(r.budget_a, ""),
                cell(r.budget_b, ""),
                cell(r.savings, ""),
            ])
            .map_err(csv_err)?;
        }
        wtr.flush().map_err(|e| CliError::io(path, e))?;
    }
    Ok(())
}

pub fn cmd_verify(u: usize, v: u64, out: &mut dyn Write) -> Result<(), CliError> {
    let report = scenarios::verify_uniform_optimality(u, v)?;
    let w = |e| CliError::io(Path::new("<stdout>"), e);
    let minimizer: Vec<String> = report.canonical_minimizer().iter().map(u64::to_string).collect();
    writeln!(
        out,
        "{}: U={u} V={v} minimizer ({}) sum of squares {}; {} minimizer(s); runner-up {}; {} vectors checked",
        if report.pass { "PASS" } else { "FAIL" },
        minimizer.join(","),
        report.minimum,
        report.minimizers.len(),
        report.runner_up.map_or("none".into(), |r| r.to_string()),
        report.checked,
    )
    .map_err(w)?;
    if report.pass {
        Ok(())
    } else {
        Err(CliError::VerifyFailed { u, v })
    }
}
