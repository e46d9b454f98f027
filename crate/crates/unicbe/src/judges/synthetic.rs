//! Synthetic preference tensors with controllable sample and model bias.
//!
//! `r̂[i][j][k] = σ(ξ_i − ξ_j + η_s[i][k] − η_s[j][k] + η_m[i][j] + ν_ijk)`
//! where `ξ ~ N(0, 1)` are latent scores, `η_s ~ N(0, sample_bias_sd²)` is a
//! per-(model, sample) offset, `η_m` is an antisymmetric per-pair offset with
//! `N(0, model_bias_sd²)` entries above the diagonal and `ν` is an
//! antisymmetric per-tuple term with standard deviation `noise_sd`.
//!
//! All offsets live in log-odds space, so `r̂` stays inside `(0, 1)`. A
//! sample offset `η` moves model `i`'s expected win rate on that sample by
//! roughly `η/4` near parity. This is a deliberately simple surrogate for real
//! judge data, not a fitted model of it.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::aggregation::bt::sigmoid;
use crate::allocation::Tuple;
use crate::session::{ModelId, SampleId};

use super::{Judge, JudgeError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BiasParams {
    pub sample_bias_sd: f64,
    pub model_bias_sd: f64,
    pub noise_sd: f64,
}

impl Default for BiasParams {
    fn default() -> Self {
        Self {
            sample_bias_sd: 1.0,
            model_bias_sd: 0.25,
            noise_sd: 0.0,
        }
    }
}

impl BiasParams {
    pub fn none() -> Self {
        Self {
            sample_bias_sd: 0.0,
            model_bias_sd: 0.0,
            noise_sd: 0.0,
        }
    }

    fn validate(&self) -> Result<(), JudgeError> {
        for (name, v) in [
            ("sample_bias_sd", self.sample_bias_sd),
            ("model_bias_sd", self.model_bias_sd),
            ("noise_sd", self.noise_sd),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(JudgeError::InvalidParams(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// A fixed synthetic preference tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthTensor {
    true_scores: Vec<f64>,
    /// `[model][sample]`
    sample_bias: Vec<Vec<f64>>,
    /// `[i][j]`, antisymmetric.
    model_bias: Vec<Vec<f64>>,
    params: BiasParams,
    noise_seed: u64,
}

pub(crate) fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed derived from `seed` and a canonical tuple.
fn tuple_seed(seed: u64, lo: u32, hi: u32, k: u32) -> u64 {
    mix(mix(mix(seed ^ 0x9e37_79b9_7f4a_7c15) ^ lo as u64) ^ ((hi as u64) << 32 | k as u64))
}

impl GroundTruthTensor {
    /// Tensor without any bias: `r̂[i][j][k] = σ(ξ_i − ξ_j)`.
    pub fn from_scores(true_scores: Vec<f64>, samples: usize) -> Self {
        let m = true_scores.len();
        Self {
            true_scores,
            sample_bias: vec![vec![0.0; samples]; m],
            model_bias: vec![vec![0.0; m]; m],
            params: BiasParams::none(),
            noise_seed: 0,
        }
    }

    pub fn models(&self) -> usize {
        self.true_scores.len()
    }

    pub fn samples(&self) -> usize {
        self.sample_bias.first().map_or(0, Vec::len)
    }

    pub fn true_scores(&self) -> &[f64] {
        &self.true_scores
    }

    pub fn params(&self) -> BiasParams {
        self.params
    }

    pub fn sample_bias(&self, m: ModelId, k: SampleId) -> f64 {
        self.sample_bias[m.index()][k.index()]
    }

    pub fn model_bias(&self, i: ModelId, j: ModelId) -> f64 {
        self.model_bias[i.index()][j.index()]
    }

    fn check(&self, t: Tuple) -> Result<(), JudgeError> {
        for m in [t.a, t.b] {
            if m.index() >= self.models() {
                return Err(JudgeError::UnknownModel(m));
            }
        }
        if t.sample.index() >= self.samples() {
            return Err(JudgeError::UnknownSample(t.sample));
        }
        Ok(())
    }

    fn noise(&self, lo: ModelId, hi: ModelId, k: SampleId) -> f64 {
        if self.params.noise_sd == 0.0 {
            return 0.0;
        }
        let mut rng = StdRng::seed_from_u64(tuple_seed(self.noise_seed ^ 0x5555, lo.0, hi.0, k.0));
        let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
        self.params.noise_sd * z
    }

    /// Log-odds of `a` beating `b` on `sample`.
    pub fn logit(&self, a: ModelId, b: ModelId, k: SampleId) -> f64 {
        if a == b {
            return 0.0;
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let (l, h) = (lo.index(), hi.index());
        let x = self.true_scores[l] - self.true_scores[h] + self.sample_bias[l][k.index()]
            - self.sample_bias[h][k.index()]
            + self.model_bias[l][h]
            + self.noise(lo, hi, k);
        sign * x
    }

    /// `r̂[a][b][sample]`; entries with `a > b` are exact complements.
    pub fn r_hat(&self, a: ModelId, b: ModelId, k: SampleId) -> f64 {
        if a == b {
            return 0.5;
        }
        let p = sigmoid(self.logit(a.min(b), a.max(b), k));
        if a < b {
            p
        } else {
            1.0 - p
        }
    }

    pub fn checked_r_hat(&self, t: Tuple) -> Result<f64, JudgeError> {
        self.check(t)?;
        Ok(self.r_hat(t.a, t.b, t.sample))
    }
}

impl AsRef<GroundTruthTensor> for GroundTruthTensor {
    fn as_ref(&self) -> &GroundTruthTensor {
        self
    }
}

/// Draws a tensor with `m` models and `n` samples.
pub fn synth_ground_truth<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    params: BiasParams,
    rng: &mut R,
) -> Result<GroundTruthTensor, JudgeError> {
    if m < 2 {
        return Err(JudgeError::InvalidParams(format!("need at least 2 models, got {m}")));
    }
    if n < 1 {
        return Err(JudgeError::InvalidParams("need at least 1 sample".into()));
    }
    params.validate()?;
    let std = Normal::new(0.0, 1.0).expect("valid normal");
    let true_scores: Vec<f64> = (0..m).map(|_| std.sample(rng)).collect();
    let sample_bias = (0..m)
        .map(|_| (0..n).map(|_| params.sample_bias_sd * std.sample(rng)).collect())
        .collect();
    let mut model_bias = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let v = params.model_bias_sd * std.sample(rng);
            model_bias[i][j] = v;
            model_bias[j][i] = -v;
        }
    }
    Ok(GroundTruthTensor {
        true_scores,
        sample_bias,
        model_bias,
        params,
        noise_seed: rng.random(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum JudgeMode {
    /// Returns `r̂` itself.
    Soft,
    /// Returns 1 with probability `r̂`, else 0; with probability `tie_prob`
    /// the outcome is a tie (0.5) instead.
    Bernoulli {
        #[serde(default)]
        tie_prob: f64,
    },
}

fn bernoulli_outcome<R: Rng + ?Sized>(p: f64, tie_prob: f64, rng: &mut R) -> f64 {
    if tie_prob > 0.0 && rng.random::<f64>() < tie_prob {
        return 0.5;
    }
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

/// One judgment from `gt`, drawing fresh randomness from `rng`.
pub fn judge_synthetic<R: Rng + ?Sized>(
    gt: &GroundTruthTensor,
    t: Tuple,
    mode: JudgeMode,
    rng: &mut R,
) -> Result<f64, JudgeError> {
    let p = gt.checked_r_hat(t)?;
    Ok(match mode {
        JudgeMode::Soft => p,
        JudgeMode::Bernoulli { tie_prob } => bernoulli_outcome(p, tie_prob, rng),
    })
}

/// A judge over a synthetic tensor whose outcome for each tuple is fixed.
///
/// Bernoulli outcomes are realized once per unordered tuple from `seed`, so
/// asking again (in either orientation) gives the same (complemented) answer
/// and the ground truth of a full traversal is well defined.
#[derive(Debug, Clone)]
pub struct SyntheticJudge<G = std::sync::Arc<GroundTruthTensor>> {
    gt: G,
    mode: JudgeMode,
    seed: u64,
}

impl<G: AsRef<GroundTruthTensor>> SyntheticJudge<G> {
    pub fn new(gt: G, mode: JudgeMode, seed: u64) -> Self {
        Self { gt, mode, seed }
    }

    pub fn ground_truth(&self) -> &GroundTruthTensor {
        self.gt.as_ref()
    }

    pub fn mode(&self) -> JudgeMode {
        self.mode
    }

    /// The fixed outcome for `t`.
    pub fn value(&self, t: Tuple) -> Result<f64, JudgeError> {
        let gt = self.gt.as_ref();
        let c = t.canonical();
        let p = gt.checked_r_hat(c)?;
        let v = match self.mode {
            JudgeMode::Soft => p,
            JudgeMode::Bernoulli { tie_prob } => {
                let mut rng = StdRng::seed_from_u64(tuple_seed(self.seed, c.a.0, c.b.0, c.sample.0));
                bernoulli_outcome(p, tie_prob, &mut rng)
            }
        };
        Ok(if c.a == t.a { v } else { 1.0 - v })
    }
}

impl<G: AsRef<GroundTruthTensor>> Judge for SyntheticJudge<G> {
    fn judge(&mut self, t: Tuple) -> Result<Option<f64>, JudgeError> {
        self.value(t).map(Some)
    }
}
