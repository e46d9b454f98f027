//! The per-seed pool of models and samples a run draws from, the judge over
//! that pool, and ground-truth computation.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::aggregation::{empirical_win_matrix, normalize, win_matrix_from_scores, Aggregator, ModelScores, Normalization};
use crate::allocation::Tuple;
use crate::judges::{mix, synth_ground_truth, CommandSpec, ExternalJudge, Judge, JudgeError, ReplayDataset, SyntheticJudge};
use crate::session::{ModelId, PreferenceRecord, SampleId};

use super::config::{FailurePolicy, JudgeSpec, ScenarioConfig};
use super::ScenarioError;

const WORLD_TAG: u64 = 0x5752_4c44;
const JUDGE_TAG: u64 = 0x4a55_4447;
pub(crate) const EVENT_TAG: u64 = 0x4556_4e54;

pub(crate) fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix(mix(seed) ^ tag)
}

/// Full-traversal scores (mean one) and the win matrix they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub scores: ModelScores,
    pub win: Vec<Vec<f64>>,
    pub records: Vec<PreferenceRecord>,
}

/// Pairwise win matrix of `scores`: reconstructed from Elo and
/// Bradley–Terry scores, observed pair means for average win rate.
pub fn win_matrix(
    aggregator: &Aggregator,
    scores: &ModelScores,
    records: &[PreferenceRecord],
    models: &[ModelId],
) -> Result<Vec<Vec<f64>>, ScenarioError> {
    match aggregator {
        Aggregator::Avg => Ok(empirical_win_matrix(records, models)),
        _ => Ok(win_matrix_from_scores(scores)?),
    }
}

/// Judges every tuple over `models × samples` once and aggregates.
pub fn ground_truth(
    judge: &mut dyn Judge,
    models: &[ModelId],
    samples: &[SampleId],
    aggregator: &Aggregator,
) -> Result<GroundTruth, ScenarioError> {
    let mut records = Vec::with_capacity(samples.len() * models.len() * models.len().saturating_sub(1) / 2);
    let mut holes = Vec::new();
    for (x, &a) in models.iter().enumerate() {
        for &b in &models[x + 1..] {
            for &k in samples {
                let t = Tuple::new(a, b, k);
                match judge.judge(t)? {
                    Some(r) => records.push(PreferenceRecord::new(a, b, k, r)),
                    None => holes.push(t),
                }
            }
        }
    }
    if !holes.is_empty() {
        return Err(ScenarioError::Holes(holes));
    }
    let raw = aggregator.aggregate(&records, models)?;
    let win = win_matrix(aggregator, &raw, &records, models)?;
    Ok(GroundTruth {
        scores: normalize(&raw, Normalization::MeanOne)?,
        win,
        records,
    })
}

/// Instructions and per-model outputs for an external judge, keyed by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseSet {
    /// sample name → instruction
    pub instructions: BTreeMap<String, String>,
    /// model name → sample name → output
    pub outputs: BTreeMap<String, BTreeMap<String, String>>,
}

impl ResponseSet {
    pub fn from_path(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        let set: ResponseSet = serde_json::from_str(&text)
            .map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        for (model, outs) in &set.outputs {
            if let Some(k) = set.instructions.keys().find(|k| !outs.contains_key(*k)) {
                return Err(ScenarioError::Pool(format!("model {model:?} has no output for sample {k:?}")));
            }
        }
        Ok(set)
    }
}

/// Data loaded once and shared by every seed.
#[derive(Debug, Clone)]
pub(crate) enum Shared {
    Synthetic,
    Replay(Arc<ReplayDataset>),
    External(CommandSpec, Arc<ResponseSet>),
}

impl Shared {
    pub(crate) fn load(cfg: &ScenarioConfig) -> Result<Self, ScenarioError> {
        Ok(match &cfg.judge {
            JudgeSpec::Synthetic { .. } => Shared::Synthetic,
            JudgeSpec::Replay { path } => Shared::Replay(Arc::new(ReplayDataset::from_path(path)?)),
            JudgeSpec::External {
                command,
                args,
                timeout_secs,
                max_parallel,
                responses,
            } => Shared::External(
                CommandSpec::new(command.clone(), args.clone())
                    .with_timeout(Duration::from_secs_f64(*timeout_secs))
                    .with_max_parallel(*max_parallel),
                Arc::new(ResponseSet::from_path(responses)?),
            ),
        })
    }
}

enum PoolJudge {
    Synthetic(SyntheticJudge),
    /// Pool index → dataset index.
    Replay {
        data: Arc<ReplayDataset>,
        models: Vec<u32>,
        samples: Vec<u32>,
    },
    External(ExternalJudge),
}

/// Pool of models and samples of one seed with its judge. Answers are keyed
/// by pool index and cached for judges that are expensive to ask.
pub(crate) struct World {
    pub(crate) model_names: Vec<String>,
    pub(crate) sample_names: Vec<String>,
    judge: PoolJudge,
    cache: Option<HashMap<(u32, u32, u32), Option<f64>>>,
}

fn pick(available: usize, needed: usize, what: &str, rng: &mut StdRng) -> Result<Vec<u32>, ScenarioError> {
    if needed > available {
        return Err(ScenarioError::Pool(format!("need {needed} {what}, the data has {available}")));
    }
    let mut idx: Vec<u32> = (0..available as u32).collect();
    idx.shuffle(rng);
    idx.truncate(needed);
    Ok(idx)
}

impl World {
    pub(crate) fn build(
        cfg: &ScenarioConfig,
        shared: &Shared,
        seed: u64,
        models: usize,
        samples: usize,
    ) -> Result<Self, ScenarioError> {
        let mut rng = StdRng::seed_from_u64(derive_seed(seed, WORLD_TAG));
        Ok(match (shared, &cfg.judge) {
            (Shared::Synthetic, JudgeSpec::Synthetic { bias, mode }) => {
                let gt = synth_ground_truth(models, samples, *bias, &mut rng)?;
                World {
                    model_names: (0..models).map(|i| format!("model-{i}")).collect(),
                    sample_names: (0..samples).map(|k| format!("sample-{k}")).collect(),
                    judge: PoolJudge::Synthetic(SyntheticJudge::new(Arc::new(gt), *mode, derive_seed(seed, JUDGE_TAG))),
                    cache: None,
                }
            }
            (Shared::Replay(data), _) => {
                let m = pick(data.models().len(), models, "models", &mut rng)?;
                let s = pick(data.samples().len(), samples, "samples", &mut rng)?;
                let name = |r: &crate::session::Registry, i: u32| r.name(i).unwrap_or_default().to_string();
                World {
                    model_names: m.iter().map(|&i| name(data.models(), i)).collect(),
                    sample_names: s.iter().map(|&i| name(data.samples(), i)).collect(),
                    judge: PoolJudge::Replay {
                        data: data.clone(),
                        models: m,
                        samples: s,
                    },
                    cache: None,
                }
            }
            (Shared::External(command, set), _) => {
                let model_keys: Vec<&String> = set.outputs.keys().collect();
                let sample_keys: Vec<&String> = set.instructions.keys().collect();
                let m = pick(model_keys.len(), models, "models", &mut rng)?;
                let s = pick(sample_keys.len(), samples, "samples", &mut rng)?;
                let model_names: Vec<String> = m.iter().map(|&i| model_keys[i as usize].clone()).collect();
                let sample_names: Vec<String> = s.iter().map(|&i| sample_keys[i as usize].clone()).collect();
                let judge = ExternalJudge {
                    command: command.clone(),
                    instructions: sample_names.iter().map(|k| set.instructions[k].clone()).collect(),
                    outputs: model_names
                        .iter()
                        .map(|mn| sample_names.iter().map(|k| set.outputs[mn][k].clone()).collect())
                        .collect(),
                };
                World {
                    model_names,
                    sample_names,
                    judge: PoolJudge::External(judge),
                    cache: Some(HashMap::new()),
                }
            }
            (Shared::Synthetic, _) => unreachable!("shared data is loaded from the same config"),
        })
    }

    /// Judges a tuple given in pool indices.
    pub(crate) fn judge_pool(&mut self, t: Tuple) -> Result<Option<f64>, JudgeError> {
        let c = t.canonical();
        let key = (c.a.0, c.b.0, c.sample.0);
        if let Some(v) = self.cache.as_ref().and_then(|cache| cache.get(&key)) {
            return Ok(v.map(|r| if c.a == t.a { r } else { 1.0 - r }));
        }
        let v = match &mut self.judge {
            PoolJudge::Synthetic(j) => j.judge(c)?,
            PoolJudge::Replay { data, models, samples } => {
                let map_m = |m: ModelId| models.get(m.index()).copied().ok_or(JudgeError::UnknownModel(m));
                let a = map_m(c.a)?;
                let b = map_m(c.b)?;
                let k = samples
                    .get(c.sample.index())
                    .copied()
                    .ok_or(JudgeError::UnknownSample(c.sample))?;
                data.lookup(ModelId(a), ModelId(b), SampleId(k))
            }
            PoolJudge::External(j) => j.judge(c)?,
        };
        if let Some(cache) = &mut self.cache {
            cache.insert(key, v);
        }
        Ok(v.map(|r| if c.a == t.a { r } else { 1.0 - r }))
    }
}

/// The world seen through a session's ids.
pub(crate) struct MappedJudge<'a> {
    pub(crate) world: &'a mut World,
    /// Session model id → pool index.
    pub(crate) models: &'a [u32],
    pub(crate) samples: &'a [u32],
    pub(crate) policy: FailurePolicy,
    pub(crate) failures: &'a mut u64,
}

impl Judge for MappedJudge<'_> {
    fn judge(&mut self, t: Tuple) -> Result<Option<f64>, JudgeError> {
        let m = |x: ModelId| self.models.get(x.index()).copied().ok_or(JudgeError::UnknownModel(x));
        let k = self
            .samples
            .get(t.sample.index())
            .copied()
            .ok_or(JudgeError::UnknownSample(t.sample))?;
        let pool = Tuple::new(ModelId(m(t.a)?), ModelId(m(t.b)?), SampleId(k));
        match self.world.judge_pool(pool) {
            Err(e) if e.is_judge_failure() && self.policy == FailurePolicy::Skip => {
                *self.failures += 1;
                Ok(None)
            }
            other => other,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::{BtOptions, Normalization};
    use crate::judges::GroundTruthTensor;

    struct Fixed(f64);
    impl Judge for Fixed {
        fn judge(&mut self, t: Tuple) -> Result<Option<f64>, JudgeError> {
            Ok(Some(if t.a < t.b { self.0 } else { 1.0 - self.0 }))
        }
    }

    /// Root of the ridge-penalised two-model score equation
    /// `w − n σ(d) − l2 d / 2 = 0` for `d = ξ_A − ξ_B`, by bisection.
    fn two_model_root(wins: f64, n: f64, l2: f64) -> f64 {
        let f = |d: f64| wins - n / (1.0 + (-d).exp()) - l2 * d / 2.0;
        let (mut lo, mut hi) = (-50.0, 50.0);
        for _ in 0..200 {
            let mid = (lo + hi) / 2.0;
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) / 2.0
    }

    #[test]
    fn single_record_ground_truth_matches_closed_form() {
        let models = [ModelId(0), ModelId(1)];
        let gt = ground_truth(&mut Fixed(1.0), &models, &[SampleId(0)], &Aggregator::bt()).unwrap();
        assert!(gt.scores.values[0] > gt.scores.values[1]);
        assert_eq!(gt.scores.normalization, Normalization::MeanOne);
        let d = two_model_root(1.0, 1.0, BtOptions::default().l2);
        let expected = 1.0 / (1.0 + (-d).exp());
        assert!((gt.win[0][1] - expected).abs() < 1e-6, "{} vs {expected}", gt.win[0][1]);
    }

    #[test]
    fn zero_bias_tensor_recovers_true_order() {
        let scores = vec![0.4, -1.1, 0.9, 0.0, -0.3];
        let tensor = Arc::new(GroundTruthTensor::from_scores(scores.clone(), 3));
        let mut judge = SyntheticJudge::new(tensor, crate::judges::JudgeMode::Soft, 0);
        let models: Vec<ModelId> = (0..5).map(ModelId).collect();
        let samples: Vec<SampleId> = (0..3).map(SampleId).collect();
        let gt = ground_truth(&mut judge, &models, &samples, &Aggregator::bt()).unwrap();
        let mut by_truth: Vec<usize> = (0..5).collect();
        by_truth.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let ranked: Vec<usize> = gt.scores.ranking().iter().map(|m| m.index()).collect();
        assert_eq!(ranked, by_truth);
    }

    #[test]
    fn full_traversal_size() {
        let models: Vec<ModelId> = (0..4).map(ModelId).collect();
        let samples: Vec<SampleId> = (0..3).map(SampleId).collect();
        let gt = ground_truth(&mut Fixed(0.5), &models, &samples, &Aggregator::Avg).unwrap();
        assert_eq!(gt.records.len(), 18);
        assert!(gt.win.iter().flatten().all(|w| *w == 0.5));
    }

    #[test]
    fn replay_holes_are_listed() {
        let mut data = ReplayDataset::new();
        data.insert("a", "b", "s0", 1.0).unwrap();
        data.insert("a", "c", "s0", 1.0).unwrap();
        let mut judge = crate::judges::ReplayJudge::new(Arc::new(data));
        let models: Vec<ModelId> = (0..3).map(ModelId).collect();
        match ground_truth(&mut judge, &models, &[SampleId(0)], &Aggregator::bt()) {
            Err(ScenarioError::Holes(h)) => assert_eq!(h, vec![Tuple::new(ModelId(1), ModelId(2), SampleId(0))]),
            other => panic!("{other:?}"),
        }
    }
}
