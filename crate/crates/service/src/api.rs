//! Request and response bodies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use unicbe::aggregation::ScoreKind;
use unicbe::metrics::BetaParts;
use unicbe::{Aggregator, Sampler, Strategy};

/// `POST /sessions` body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    /// Unique across the service.
    pub name: String,
    pub models: Vec<String>,
    pub samples: Vec<SampleSpec>,
    /// `responses[model][sample]` is the text shown to annotators.
    pub responses: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default)]
    pub strategy: Strategy,
    /// Defaults to the strategy's usual sampler.
    #[serde(default)]
    pub sampler: Option<Sampler>,
    #[serde(default)]
    pub aggregator: Aggregator,
    #[serde(default)]
    pub seed: u64,
    /// Refit the scores returned by submissions every this many judgments.
    #[serde(default = "one")]
    pub refit_every: u64,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    pub name: String,
    pub instruction: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    pub name: String,
    pub models: usize,
    pub samples: usize,
    /// Tuples a full traversal would judge.
    pub full_budget: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingResponse {
    pub model: String,
    pub sample: String,
}

/// `GET /sessions/{id}/next` body. Carries no model identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub assignment: String,
    pub instruction: String,
    pub left: String,
    pub right: String,
    pub progress: Progress,
    pub expires_in_secs: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub used: u64,
    pub full: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    Left,
    Right,
    Tie,
}

/// `POST /assignments/{id}/preference` body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Submission {
    pub choice: Choice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub model: String,
    /// Mean-one normalized.
    pub score: f64,
    /// 1 for the best model.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRow {
    pub model_a: String,
    pub model_b: String,
    pub comparisons: u64,
    /// Mean preference of `model_a` over `model_b`; 0.5 before any comparison.
    pub win_rate: f64,
    pub epsilon: f64,
}

/// Scores and diagnostics computed from the record log alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub aggregator: ScoreKind,
    /// Some model has no judgment yet; its score is a placeholder.
    pub insufficient_data: bool,
    /// Best first.
    pub scores: Vec<ScoreRow>,
    pub pairs: Vec<PairRow>,
    /// Each value is `null` while undefined (no judgments, or every `ε` zero).
    pub beta: BetaParts,
    pub budget_used: u64,
    pub full_budget: u64,
    /// Judgments behind the scores (lags `budget_used` when refits are spaced).
    pub fitted_at: u64,
}

/// `GET /sessions/{id}/leaderboard` and submission responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardView {
    pub session: String,
    pub pending: usize,
    #[serde(flatten)]
    pub leaderboard: Leaderboard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing: Vec<MissingResponse>,
}
