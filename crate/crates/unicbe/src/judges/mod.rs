//! Preference sources: a synthetic ground-truth generator, dataset replay,
//! an external-command judge and list-wise ranking expansion.

mod external;
mod replay;
mod synthetic;

use std::collections::HashSet;
use std::time::Duration;

use thiserror::Error;

use crate::allocation::Tuple;
use crate::session::{ModelId, PreferenceRecord, SampleId};

pub use external::{judge_external, CommandSpec, ExternalJudge, DEFAULT_TIMEOUT};
pub use replay::{IngestError, IngestSummary, ReplayDataset, ReplayJudge, ReplayLine, Winner};
pub(crate) use synthetic::mix;
pub use synthetic::{judge_synthetic, synth_ground_truth, BiasParams, GroundTruthTensor, JudgeMode, SyntheticJudge};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JudgeError {
    #[error("model {0} is outside the judge's range")]
    UnknownModel(ModelId),
    #[error("sample {0} is outside the judge's range")]
    UnknownSample(SampleId),
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("invalid ranking: {0}")]
    InvalidRanking(String),
    #[error("no preference available for {0:?}")]
    Missing(Tuple),
    #[error("judge command timed out after {0:?}")]
    Timeout(Duration),
    #[error("judge command exited with {0}")]
    Exit(String),
    #[error("malformed judge response: {0}")]
    Malformed(String),
    #[error("could not run judge command: {0}")]
    Io(String),
}

impl JudgeError {
    /// Errors raised by a failing external judge, as opposed to misuse.
    pub fn is_judge_failure(&self) -> bool {
        matches!(
            self,
            JudgeError::Timeout(_) | JudgeError::Exit(_) | JudgeError::Malformed(_) | JudgeError::Io(_)
        )
    }
}

/// A pairwise preference source. `Ok(None)` means the tuple cannot be
/// answered (for example, absent from a replay dataset) and should be masked.
pub trait Judge {
    /// Preference of `t.a` over `t.b` on `t.sample`, in `[0, 1]`.
    fn judge(&mut self, t: Tuple) -> Result<Option<f64>, JudgeError>;
}

impl<J: Judge + ?Sized> Judge for &mut J {
    fn judge(&mut self, t: Tuple) -> Result<Option<f64>, JudgeError> {
        (**self).judge(t)
    }
}

/// Best-first tiers of models; models sharing a tier are tied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking(pub Vec<Vec<ModelId>>);

impl Ranking {
    /// Strict order, best first.
    pub fn strict(order: &[ModelId]) -> Self {
        Ranking(order.iter().map(|m| vec![*m]).collect())
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A source that ranks several models' outputs on one sample at once.
pub trait ListwiseJudge {
    fn rank(&mut self, models: &[ModelId], sample: SampleId) -> Result<Ranking, JudgeError>;
}

/// Ranks a list by Copeland score under a pairwise judge: each model scores
/// the sum of its preferences against the others; equal scores tie.
#[derive(Debug, Clone)]
pub struct CopelandRanker<J> {
    pub judge: J,
}

impl<J: Judge> ListwiseJudge for CopelandRanker<J> {
    fn rank(&mut self, models: &[ModelId], sample: SampleId) -> Result<Ranking, JudgeError> {
        let mut scores = vec![0.0; models.len()];
        for x in 0..models.len() {
            for y in x + 1..models.len() {
                let t = Tuple::new(models[x], models[y], sample);
                let r = self.judge.judge(t)?.ok_or(JudgeError::Missing(t))?;
                scores[x] += r;
                scores[y] += 1.0 - r;
            }
        }
        let mut order: Vec<usize> = (0..models.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let mut tiers: Vec<Vec<ModelId>> = Vec::new();
        let mut last = f64::NAN;
        for i in order {
            if scores[i] == last {
                tiers.last_mut().expect("tier exists").push(models[i]);
            } else {
                tiers.push(vec![models[i]]);
                last = scores[i];
            }
        }
        Ok(Ranking(tiers))
    }
}

/// Expands a ranking into its `K(K-1)/2` pairwise records: the higher-ranked
/// model wins with `r = 1`, models in the same tier tie with `r = 0.5`.
pub fn listwise_expand(ranking: &Ranking, sample: SampleId) -> Result<Vec<PreferenceRecord>, JudgeError> {
    let flat: Vec<(usize, ModelId)> = ranking
        .0
        .iter()
        .enumerate()
        .flat_map(|(tier, ms)| ms.iter().map(move |m| (tier, *m)))
        .collect();
    if flat.len() < 2 {
        return Err(JudgeError::InvalidRanking(format!(
            "need at least two models, got {}",
            flat.len()
        )));
    }
    let mut seen = HashSet::new();
    for (_, m) in &flat {
        if !seen.insert(*m) {
            return Err(JudgeError::InvalidRanking(format!("{m} appears twice")));
        }
    }
    let mut out = Vec::with_capacity(flat.len() * (flat.len() - 1) / 2);
    for (x, &(tx, a)) in flat.iter().enumerate() {
        for &(ty, b) in &flat[x + 1..] {
            let r = if tx == ty { 0.5 } else { 1.0 };
            out.push(PreferenceRecord::new(a, b, sample, r));
        }
    }
    Ok(out)
}
