//! Evaluation-quality metrics, uniformity diagnostics and bias analyses.

mod bias;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::AggregationError;
use crate::session::{ComparisonLedger, ModelId, SampleId, WinRateStats};

pub use bias::{bias_analysis, detect_nontransitive_triplets, full_traversal, BiasReport, Histogram};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("inputs differ in shape")]
    ShapeMismatch,
    #[error("correlation undefined: zero variance")]
    ZeroVariance,
    #[error("need at least two values")]
    TooShort,
    #[error("curve never reaches {0}")]
    Unreachable(f64),
    #[error("no comparisons recorded")]
    EmptyLedger,
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
}

/// Mean absolute difference over the strict upper triangle.
pub fn win_rate_error(est: &[Vec<f64>], gt: &[Vec<f64>]) -> Result<f64, MetricError> {
    let m = gt.len();
    if est.len() != m || est.iter().chain(gt).any(|row| row.len() != m) {
        return Err(MetricError::ShapeMismatch);
    }
    if m < 2 {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            sum += (est[i][j] - gt[i][j]).abs();
        }
    }
    Ok(sum / (m * (m - 1) / 2) as f64)
}

/// Product-moment correlation.
pub fn pearson(u: &[f64], v: &[f64]) -> Result<f64, MetricError> {
    if u.len() != v.len() {
        return Err(MetricError::ShapeMismatch);
    }
    if u.len() < 2 {
        return Err(MetricError::TooShort);
    }
    let n = u.len() as f64;
    let mu = u.iter().sum::<f64>() / n;
    let mv = v.iter().sum::<f64>() / n;
    let (mut suv, mut suu, mut svv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let (da, db) = (a - mu, b - mv);
        suv += da * db;
        suu += da * da;
        svv += db * db;
    }
    if suu == 0.0 || svv == 0.0 {
        return Err(MetricError::ZeroVariance);
    }
    Ok((suv / (suu.sqrt() * svv.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties given their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation of average ranks.
pub fn spearman(u: &[f64], v: &[f64]) -> Result<f64, MetricError> {
    if u.len() != v.len() {
        return Err(MetricError::ShapeMismatch);
    }
    pearson(&average_ranks(u), &average_ranks(v))
}

/// What a curve is measuring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Delta,
    RS,
    RP,
    BetaAcc,
    BetaCon,
    BetaSca,
}

impl MetricKind {
    pub const ALL: [MetricKind; 6] = [
        MetricKind::Delta,
        MetricKind::RS,
        MetricKind::RP,
        MetricKind::BetaAcc,
        MetricKind::BetaCon,
        MetricKind::BetaSca,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Delta => "delta",
            MetricKind::RS => "r_s",
            MetricKind::RP => "r_p",
            MetricKind::BetaAcc => "beta_acc",
            MetricKind::BetaCon => "beta_con",
            MetricKind::BetaSca => "beta_sca",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Error metrics improve downwards, the rest upwards.
    pub fn goal(&self) -> Goal {
        match self {
            MetricKind::Delta => Goal::AtMost,
            _ => Goal::AtLeast,
        }
    }
}

/// Direction in which a target counts as reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Goal {
    AtMost,
    AtLeast,
}

impl Goal {
    fn reached(&self, value: f64, target: f64) -> bool {
        match self {
            Goal::AtMost => value <= target,
            Goal::AtLeast => value >= target,
        }
    }
}

/// Metric values against budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCurve {
    pub kind: MetricKind,
    pub points: Vec<(u64, f64)>,
    /// Which seeds the values summarize, e.g. `"seed 3"` or `"mean of 200"`.
    pub seeds: String,
}

impl MetricCurve {
    pub fn new(kind: MetricKind, points: Vec<(u64, f64)>, seeds: impl Into<String>) -> Self {
        Self {
            kind,
            points,
            seeds: seeds.into(),
        }
    }

    /// Budget at which the curve first reaches `target`, interpolating
    /// linearly between the bracketing points.
    pub fn first_crossing(&self, target: f64) -> Option<f64> {
        let goal = self.kind.goal();
        let mut prev: Option<(u64, f64)> = None;
        for &(t, v) in &self.points {
            if goal.reached(v, target) {
                return Some(match prev {
                    None => t as f64,
                    Some((t0, v0)) => {
                        if v == v0 {
                            t as f64
                        } else {
                            t0 as f64 + (target - v0) / (v - v0) * (t - t0) as f64
                        }
                    }
                });
            }
            prev = Some((t, v));
        }
        None
    }

    pub fn value_at(&self, budget: u64) -> Option<f64> {
        self.points.iter().find(|(t, _)| *t == budget).map(|(_, v)| *v)
    }
}

/// Percentage of budget `method` saves over `baseline` to reach `target`.
pub fn budget_savings(method: &MetricCurve, baseline: &MetricCurve, target: f64) -> Result<f64, MetricError> {
    let tm = method.first_crossing(target).ok_or(MetricError::Unreachable(target))?;
    let tb = baseline.first_crossing(target).ok_or(MetricError::Unreachable(target))?;
    if tb == 0.0 {
        return Ok(0.0);
    }
    Ok(100.0 * (tb - tm) / tb)
}

/// Uniformity of an allocation for each objective, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaReport {
    pub beta_acc: f64,
    pub beta_con: f64,
    pub beta_sca: f64,
}

/// Cosine similarity with the all-equal vector of the same length.
fn cos_to_uniform(v: &[f64]) -> Option<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return None;
    }
    let sum: f64 = v.iter().sum();
    Some((sum / (norm * (v.len() as f64).sqrt())).clamp(0.0, 1.0))
}

/// Cosine similarity of nonnegative vectors; `None` if either is zero.
pub fn cosine(u: &[f64], v: &[f64]) -> Option<f64> {
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return None;
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Some((dot / (nu * nv)).clamp(0.0, 1.0))
}

/// β metrics over the given models and samples.
///
/// * `β_acc`: cosine of the off-diagonal pair-count matrix with the uniform
///   pair matrix, times the cosine of the model–sample count matrix with the
///   uniform one;
/// * `β_con`: cosine of the off-diagonal `ε` matrix with the uniform one;
/// * `β_sca`: cosine of per-model comparison totals with the uniform vector.
///
/// Only comparisons among the given models on the given samples count.
pub fn beta_metrics(
    ledger: &ComparisonLedger,
    stats: &WinRateStats,
    models: &[ModelId],
    samples: &[SampleId],
) -> Result<BetaReport, MetricError> {
    let p = beta_parts(ledger, stats, models, samples);
    match (p.beta_acc, p.beta_con, p.beta_sca) {
        (Some(beta_acc), Some(beta_con), Some(beta_sca)) => Ok(BetaReport {
            beta_acc,
            beta_con,
            beta_sca,
        }),
        _ => Err(MetricError::EmptyLedger),
    }
}

pub fn beta_parts(
    ledger: &ComparisonLedger,
    stats: &WinRateStats,
    models: &[ModelId],
    samples: &[SampleId],
) -> BetaParts {
    let m = models.len();
    let mut pair = Vec::with_capacity(m * m.saturating_sub(1));
    let mut eps = Vec::with_capacity(m * m.saturating_sub(1));
    let mut cell = vec![0.0; m * samples.len()];
    let mut totals = vec![0.0; m];
    for (x, &a) in models.iter().enumerate() {
        for (y, &b) in models.iter().enumerate() {
            if x == y {
                continue;
            }
            let mut c = 0.0;
            for (s, &k) in samples.iter().enumerate() {
                let n = ledger.count(a, b, k) as f64;
                c += n;
                cell[x * samples.len() + s] += n;
            }
            pair.push(c);
            totals[x] += c;
            eps.push(stats.epsilon(a, b));
        }
    }
    BetaParts {
        beta_acc: cos_to_uniform(&pair).zip(cos_to_uniform(&cell)).map(|(a, b)| a * b),
        beta_con: cos_to_uniform(&eps),
        beta_sca: cos_to_uniform(&totals),
    }
}

/// [`beta_metrics`] with each value reported separately; `None` where the
/// underlying vector is all zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParts {
    pub beta_acc: Option<f64>,
    pub beta_con: Option<f64>,
    pub beta_sca: Option<f64>,
}
