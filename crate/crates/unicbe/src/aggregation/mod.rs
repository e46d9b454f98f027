//! Preference aggregation: average win rate, Elo, and Bradley–Terry.

pub mod bt;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{ModelId, PreferenceRecord};

pub use bt::{BtFailure, BtOptions, PairSums};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    AvgWinrate,
    Elo,
    Bt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    MeanOne,
    MeanZeroXi,
    None,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregationError {
    #[error("Bradley-Terry fit did not converge after {iterations} iterations (gradient max-norm {grad_norm:e})")]
    NonConvergence {
        last: Vec<f64>,
        grad_norm: f64,
        iterations: usize,
    },
    #[error("cannot normalize to mean one: mean is {0}")]
    NonPositiveMean(f64),
    #[error("{0:?} scores have no pairwise win-rate reconstruction")]
    NoReconstruction(ScoreKind),
}

impl From<BtFailure> for AggregationError {
    fn from(f: BtFailure) -> Self {
        AggregationError::NonConvergence {
            last: f.last,
            grad_norm: f.grad_norm,
            iterations: f.iterations,
        }
    }
}

/// Scores for an ordered set of models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub models: Vec<ModelId>,
    pub values: Vec<f64>,
    pub kind: ScoreKind,
    pub normalization: Normalization,
    /// Models that appeared in no record; their value is a placeholder.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unscored: Vec<ModelId>,
}

impl ModelScores {
    pub fn get(&self, model: ModelId) -> Option<f64> {
        self.models
            .iter()
            .position(|&m| m == model)
            .map(|p| self.values[p])
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Model ids sorted by descending score (stable on ties).
    pub fn ranking(&self) -> Vec<ModelId> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]));
        idx.into_iter().map(|i| self.models[i]).collect()
    }
}

/// An aggregation strategy with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Aggregator {
    Avg,
    Elo {
        #[serde(default = "default_k")]
        k_factor: f64,
        #[serde(default = "default_initial")]
        initial_rating: f64,
    },
    Bt {
        #[serde(default = "default_l2")]
        l2: f64,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_iters")]
        max_iters: usize,
    },
}

fn default_k() -> f64 {
    4.0
}
fn default_initial() -> f64 {
    1000.0
}
fn default_l2() -> f64 {
    BtOptions::default().l2
}
fn default_tol() -> f64 {
    BtOptions::default().tol
}
fn default_iters() -> usize {
    BtOptions::default().max_iters
}

impl Default for Aggregator {
    fn default() -> Self {
        Aggregator::bt()
    }
}

impl Aggregator {
    pub fn bt() -> Self {
        let o = BtOptions::default();
        Aggregator::Bt {
            l2: o.l2,
            tol: o.tol,
            max_iters: o.max_iters,
        }
    }

    pub fn elo() -> Self {
        Aggregator::Elo {
            k_factor: default_k(),
            initial_rating: default_initial(),
        }
    }

    pub fn kind(&self) -> ScoreKind {
        match self {
            Aggregator::Avg => ScoreKind::AvgWinrate,
            Aggregator::Elo { .. } => ScoreKind::Elo,
            Aggregator::Bt { .. } => ScoreKind::Bt,
        }
    }

    /// Aggregates the records that involve only models in `models`.
    pub fn aggregate(
        &self,
        records: &[PreferenceRecord],
        models: &[ModelId],
    ) -> Result<ModelScores, AggregationError> {
        match *self {
            Aggregator::Avg => Ok(aggregate_avg(records, models)),
            Aggregator::Elo {
                k_factor,
                initial_rating,
            } => Ok(aggregate_elo(records, models, k_factor, initial_rating)),
            Aggregator::Bt { l2, tol, max_iters } => aggregate_bt(
                records,
                models,
                BtOptions { l2, tol, max_iters },
            ),
        }
    }
}

fn local_index(models: &[ModelId]) -> HashMap<ModelId, usize> {
    models.iter().enumerate().map(|(i, &m)| (m, i)).collect()
}

/// Average win rate of each model over the records it appears in.
pub fn aggregate_avg(records: &[PreferenceRecord], models: &[ModelId]) -> ModelScores {
    let index = local_index(models);
    let mut sum = vec![0.0; models.len()];
    let mut count = vec![0u64; models.len()];
    for rec in records {
        let (Some(&a), Some(&b)) = (index.get(&rec.a), index.get(&rec.b)) else {
            continue;
        };
        sum[a] += rec.r;
        sum[b] += 1.0 - rec.r;
        count[a] += 1;
        count[b] += 1;
    }
    let mut unscored = Vec::new();
    let values = (0..models.len())
        .map(|i| {
            if count[i] == 0 {
                unscored.push(models[i]);
                0.5
            } else {
                sum[i] / count[i] as f64
            }
        })
        .collect();
    ModelScores {
        models: models.to_vec(),
        values,
        kind: ScoreKind::AvgWinrate,
        normalization: Normalization::None,
        unscored,
    }
}

/// Expected score of a player rated `ra` against one rated `rb`.
pub fn elo_expected(ra: f64, rb: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((rb - ra) / 400.0))
}

/// Ratings after one game where `a` scored `score_a` (1 win, 0.5 draw, 0 loss).
/// The update is zero-sum.
pub fn elo_update(ra: f64, rb: f64, score_a: f64, k: f64) -> (f64, f64) {
    let delta = k * (score_a - elo_expected(ra, rb));
    (ra + delta, rb - delta)
}

/// Sequential Elo over the records in log order.
pub fn aggregate_elo(
    records: &[PreferenceRecord],
    models: &[ModelId],
    k_factor: f64,
    initial_rating: f64,
) -> ModelScores {
    let index = local_index(models);
    let mut ratings = vec![initial_rating; models.len()];
    let mut seen = vec![false; models.len()];
    for rec in records {
        let (Some(&a), Some(&b)) = (index.get(&rec.a), index.get(&rec.b)) else {
            continue;
        };
        let (ra, rb) = elo_update(ratings[a], ratings[b], rec.r, k_factor);
        ratings[a] = ra;
        ratings[b] = rb;
        seen[a] = true;
        seen[b] = true;
    }
    ModelScores {
        unscored: models
            .iter()
            .zip(&seen)
            .filter(|(_, s)| !**s)
            .map(|(m, _)| *m)
            .collect(),
        models: models.to_vec(),
        values: ratings,
        kind: ScoreKind::Elo,
        normalization: Normalization::None,
    }
}

/// Pair sufficient statistics of the records among `models`.
pub fn pair_sums(records: &[PreferenceRecord], models: &[ModelId]) -> PairSums {
    let index = local_index(models);
    let mut sums = PairSums::new(models.len());
    for rec in records {
        if let (Some(&a), Some(&b)) = (index.get(&rec.a), index.get(&rec.b)) {
            sums.add(a, b, rec.r);
        }
    }
    sums
}

/// Bradley–Terry coefficients with mean zero.
pub fn aggregate_bt(
    records: &[PreferenceRecord],
    models: &[ModelId],
    opts: BtOptions,
) -> Result<ModelScores, AggregationError> {
    let sums = pair_sums(records, models);
    bt_from_sums(&sums, models, opts)
}

/// Bradley–Terry fit from precomputed pair sums aligned with `models`.
pub fn bt_from_sums(
    sums: &PairSums,
    models: &[ModelId],
    opts: BtOptions,
) -> Result<ModelScores, AggregationError> {
    let xi = bt::fit(sums, opts, None)?;
    let unscored = (0..models.len())
        .filter(|&i| (0..models.len()).all(|j| sums.count(i, j) == 0.0))
        .map(|i| models[i])
        .collect();
    Ok(ModelScores {
        models: models.to_vec(),
        values: xi,
        kind: ScoreKind::Bt,
        normalization: Normalization::MeanZeroXi,
        unscored,
    })
}

/// Observed mean outcome of each ordered pair among `models`; pairs without
/// records and the diagonal are 0.5.
pub fn empirical_win_matrix(records: &[PreferenceRecord], models: &[ModelId]) -> Vec<Vec<f64>> {
    let sums = pair_sums(records, models);
    let n = models.len();
    let mut w = vec![vec![0.5; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let c = sums.count(i, j);
            if c > 0.0 {
                let pij = sums.wins(i, j) / c;
                w[i][j] = pij;
                w[j][i] = 1.0 - pij;
            }
        }
    }
    w
}

/// Pairwise win probabilities implied by the scores; the diagonal is 0.5.
pub fn win_matrix_from_scores(scores: &ModelScores) -> Result<Vec<Vec<f64>>, AggregationError> {
    let v = &scores.values;
    let n = v.len();
    let p: Box<dyn Fn(usize, usize) -> f64> = match scores.kind {
        ScoreKind::Bt => Box::new(|i, j| bt::sigmoid(v[i] - v[j])),
        ScoreKind::Elo => Box::new(|i, j| elo_expected(v[i], v[j])),
        ScoreKind::AvgWinrate => return Err(AggregationError::NoReconstruction(ScoreKind::AvgWinrate)),
    };
    let mut w = vec![vec![0.5; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let pij = p(i, j);
            // Store the larger orientation and derive the other so rows sum to one exactly.
            let (big, i_big) = if pij >= 0.5 { (pij, true) } else { (1.0 - pij, false) };
            let small = 1.0 - big;
            if i_big {
                w[i][j] = big;
                w[j][i] = small;
            } else {
                w[i][j] = small;
                w[j][i] = big;
            }
        }
    }
    Ok(w)
}

/// Rescales or shifts scores to the requested normalization.
///
/// `MeanOne` shifts Bradley–Terry coefficients and rescales positive scores;
/// `MeanZeroXi` shifts any score vector to mean zero.
pub fn normalize(scores: &ModelScores, mode: Normalization) -> Result<ModelScores, AggregationError> {
    let mut out = scores.clone();
    let mean = scores.mean();
    match mode {
        Normalization::None => {}
        Normalization::MeanZeroXi => out.values.iter_mut().for_each(|v| *v -= mean),
        Normalization::MeanOne => {
            if scores.kind == ScoreKind::Bt {
                out.values.iter_mut().for_each(|v| *v += 1.0 - mean);
            } else {
                if mean <= 0.0 {
                    return Err(AggregationError::NonPositiveMean(mean));
                }
                out.values.iter_mut().for_each(|v| *v /= mean);
            }
        }
    }
    out.normalization = mode;
    Ok(out)
}
