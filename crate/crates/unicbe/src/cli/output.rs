//! Run artifacts: `curves.csv`, `scores.json` and `manifest.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::metrics::{MetricCurve, MetricKind};
use crate::scenarios::{
    ArrivalStat, EvalPoint, FinalScores, Metrics, PlannedEvent, RunResult, ScenarioConfig,
};
use crate::session::PreferenceRecord;

use super::CliError;

pub const CURVES_FILE: &str = "curves.csv";
pub const SCORES_FILE: &str = "scores.json";
pub const MANIFEST_FILE: &str = "manifest.json";

const MANIFEST_VERSION: u32 = 1;

/// Formats with nine significant digits, trailing zeros dropped; `"0"` for
/// zero. Very large or small magnitudes use exponent notation.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let e = x.abs().log10().floor() as i32;
    let s = if (-5..=15).contains(&e) {
        format!("{:.*}", (8 - e).max(0) as usize, x)
    } else {
        format!("{x:.8e}")
    };
    if s.contains('e') || !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Everything needed to reproduce a run; passing this file back as
/// `--config` repeats it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub version: String,
    pub config: ScenarioConfig,
    pub seeds: Vec<u64>,
    pub outputs: Outputs,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub curves: PathBuf,
    pub scores: PathBuf,
    pub manifest: PathBuf,
}

impl RunManifest {
    pub fn new(cfg: &ScenarioConfig, dir: &Path, wall_clock_secs: f64) -> Self {
        Self {
            manifest_version: MANIFEST_VERSION,
            version: concat!("v", env!("CARGO_PKG_VERSION")).to_string(),
            config: cfg.clone(),
            seeds: cfg.seeds.to_vec(),
            outputs: Outputs {
                curves: dir.join(CURVES_FILE),
                scores: dir.join(SCORES_FILE),
                manifest: dir.join(MANIFEST_FILE),
            },
            wall_clock_secs,
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    write_json(path, manifest)
}

#[derive(Serialize)]
struct ScoresFile<'a> {
    manifest: &'a str,
    strategies: Vec<StrategyScores<'a>>,
}

#[derive(Serialize)]
struct StrategyScores<'a> {
    label: &'a str,
    runs: Vec<SeedScores<'a>>,
}

#[derive(Serialize)]
struct SeedScores<'a> {
    seed: u64,
    truncated: bool,
    judge_failures: u64,
    #[serde(flatten)]
    scores: &'a FinalScores,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    arrivals: &'a [ArrivalStat],
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    events: &'a [PlannedEvent],
    #[serde(skip_serializing_if = "Option::is_none")]
    records: Option<&'a [PreferenceRecord]>,
}

/// Final scores of every run plus arrival and event logs.
pub fn write_scores(path: &Path, result: &RunResult) -> Result<(), CliError> {
    let file = ScoresFile {
        manifest: MANIFEST_FILE,
        strategies: result
            .strategies
            .iter()
            .map(|s| StrategyScores {
                label: &s.label,
                runs: s
                    .runs
                    .iter()
                    .map(|r| SeedScores {
                        seed: r.seed,
                        truncated: r.truncated,
                        judge_failures: r.judge_failures,
                        scores: &r.final_scores,
                        arrivals: &r.arrivals,
                        events: &r.events,
                        records: r.records.as_deref(),
                    })
                    .collect(),
            })
            .collect(),
    };
    write_json(path, &file)
}

/// One row of `curves.csv`; `seed` is a number or `"mean"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub strategy: String,
    pub seed: String,
    #[serde(rename = "T")]
    pub t: u64,
    pub delta: f64,
    pub r_s: f64,
    pub r_p: f64,
    pub beta_acc: f64,
    pub beta_con: f64,
    pub beta_sca: f64,
}

impl CurveRow {
    pub fn metric(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::Delta => self.delta,
            MetricKind::RS => self.r_s,
            MetricKind::RP => self.r_p,
            MetricKind::BetaAcc => self.beta_acc,
            MetricKind::BetaCon => self.beta_con,
            MetricKind::BetaSca => self.beta_sca,
        }
    }
}

const HEADER: [&str; 9] = ["strategy", "seed", "T", "delta", "r_s", "r_p", "beta_acc", "beta_con", "beta_sca"];

fn metric_cells(m: &Metrics) -> impl Iterator<Item = String> + '_ {
    MetricKind::ALL.into_iter().map(|k| fmt_sig(m.get(k)))
}

/// Per-seed rows then the seed-mean rows of each strategy. The first line is
/// a `#` comment naming the manifest.
pub fn write_curves(path: &Path, result: &RunResult) -> Result<(), CliError> {
    let mut buf = format!("# manifest: {MANIFEST_FILE}\n").into_bytes();
    {
        let mut wtr = csv::Writer::from_writer(&mut buf);
        let err = |e: csv::Error| CliError::Input(format!("{}: {e}", path.display()));
        wtr.write_record(HEADER).map_err(err)?;
        for s in &result.strategies {
            for run in &s.runs {
                for EvalPoint { budget, metrics } in &run.points {
                    let head = [s.label.clone(), run.seed.to_string(), budget.to_string()];
                    wtr.write_record(head.into_iter().chain(metric_cells(metrics))).map_err(err)?;
                }
            }
            for p in &s.mean {
                let head = [s.label.clone(), "mean".to_string(), p.budget.to_string()];
                wtr.write_record(head.into_iter().chain(metric_cells(&p.mean))).map_err(err)?;
            }
        }
        wtr.flush().map_err(|e| CliError::io(path, e))?;
    }
    std::fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

pub fn read_curves(path: &Path) -> Result<Vec<CurveRow>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    rdr.deserialize()
        .collect::<Result<Vec<CurveRow>, _>>()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// The seed-mean curve of one strategy.
pub(crate) fn mean_curve(rows: &[CurveRow], label: &str, kind: MetricKind) -> MetricCurve {
    let points = rows
        .iter()
        .filter(|r| r.strategy == label && r.seed == "mean")
        .map(|r| (r.t, r.metric(kind)))
        .collect();
    MetricCurve::new(kind, points, "mean")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(0.123456789123), "0.123456789");
        assert_eq!(fmt_sig(1712.65748938), "1712.65749");
        assert_eq!(fmt_sig(-0.000123456789123), "-0.000123456789");
        assert_eq!(fmt_sig(2.5e-9), "2.50000000e-9");
        for x in [0.3, 1.0 / 3.0, 0.017577, 123456.789, 9.99999999951e-2] {
            let back: f64 = fmt_sig(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 5e-9, "{x} -> {}", fmt_sig(x));
        }
    }
}
