//! Budget allocation strategies and tuple samplers.
//!
//! Every strategy maps the current session state to a [`SamplingTensor`]
//! over the active `(pair, sample)` tuples that have not been judged and are
//! not blocked. A [`Sampler`] then picks one tuple from it.

mod baselines;
mod listwise;
mod sampling;
mod tensor;
mod unicbe;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{ModelId, SampleId, Session};

pub use baselines::{allocate_alpacaeval, allocate_arena, allocate_random};
pub use listwise::allocate_listwise;
pub use sampling::{sample_greedy, sample_probabilistic, sample_temperature, Sampler};
pub use tensor::SamplingTensor;
pub use unicbe::{allocate_unicbe, combine, p_acc, p_con, p_sca};

/// One unit of judgment: models `a` and `b` compared on `sample`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tuple {
    pub a: ModelId,
    pub b: ModelId,
    pub sample: SampleId,
}

impl Tuple {
    pub fn new(a: ModelId, b: ModelId, sample: SampleId) -> Self {
        Self { a, b, sample }
    }

    /// Same tuple with the lower model index first.
    pub fn canonical(self) -> Self {
        if self.a <= self.b {
            self
        } else {
            Self {
                a: self.b,
                b: self.a,
                sample: self.sample,
            }
        }
    }

    pub fn involves(&self, m: ModelId) -> bool {
        self.a == m || self.b == m
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocError {
    #[error("no eligible tuple remains")]
    Exhausted,
    #[error("need at least two active models")]
    TooFewModels,
    #[error("no active samples")]
    NoSamples,
    #[error("alpha must be greater than 1, got {0}")]
    InvalidAlpha(f64),
    #[error("objective weights must be finite and nonnegative")]
    InvalidTheta,
    #[error("reference model {0} is not registered")]
    UnknownReference(ModelId),
    #[error("temperature must be nonnegative, got {0}")]
    InvalidTemperature(f64),
    #[error("tensors differ in shape or mask")]
    ShapeMismatch,
    #[error("list size {k} exceeds the {models} active models")]
    ListTooLarge { k: usize, models: usize },
    #[error("list size must be at least 2, got {0}")]
    ListTooSmall(usize),
}

/// Why a strategy fell back to a simpler distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationNote {
    /// Every combined weight was zero; the tuple-count term alone was used.
    ZeroProductFallback,
    /// Every uncertainty reduction was zero; uniform over eligible tuples.
    UniformFallback,
    /// All reference pairs are judged; uniform over the remaining tuples.
    ReferenceExhausted,
}

/// Exponents on the three UniCBE components and the count base `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveWeights {
    pub theta_acc: f64,
    pub theta_con: f64,
    pub theta_sca: f64,
    pub alpha: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            theta_acc: 1.0,
            theta_con: 1.0,
            theta_sca: 1.0,
            alpha: 2.0,
        }
    }
}

impl ObjectiveWeights {
    pub fn validate(&self) -> Result<(), AllocError> {
        check_alpha(self.alpha)?;
        for t in [self.theta_acc, self.theta_con, self.theta_sca] {
            if !t.is_finite() || t < 0.0 {
                return Err(AllocError::InvalidTheta);
            }
        }
        Ok(())
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<(), AllocError> {
    if alpha.is_finite() && alpha > 1.0 {
        Ok(())
    } else {
        Err(AllocError::InvalidAlpha(alpha))
    }
}

/// Budget allocation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Strategy {
    #[serde(rename = "unicbe")]
    UniCbe(ObjectiveWeights),
    Random,
    Arena,
    /// Compare every model against a fixed reference; the lowest active
    /// index is used when no reference is given.
    #[serde(rename = "alpacaeval")]
    AlpacaEval {
        #[serde(default)]
        reference: Option<ModelId>,
    },
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy::UniCbe(ObjectiveWeights::default())
    }
}

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::UniCbe(_) => "unicbe",
            Strategy::Random => "random",
            Strategy::Arena => "arena",
            Strategy::AlpacaEval { .. } => "alpacaeval",
        }
    }

    /// Sampler each strategy is usually paired with.
    pub fn default_sampler(&self) -> Sampler {
        match self {
            Strategy::UniCbe(_) | Strategy::AlpacaEval { .. } => Sampler::Greedy,
            Strategy::Random | Strategy::Arena => Sampler::Probabilistic,
        }
    }
}

/// Runs `strategy` on the session state.
pub fn allocate(session: &Session, strategy: &Strategy) -> Result<SamplingTensor, AllocError> {
    match *strategy {
        Strategy::UniCbe(w) => unicbe::allocate_with(session, w),
        Strategy::Random => allocate_random(session),
        Strategy::Arena => allocate_arena(session),
        Strategy::AlpacaEval { reference } => {
            let reference = match reference {
                Some(r) => r,
                None => *session
                    .active_models()
                    .first()
                    .ok_or(AllocError::TooFewModels)?,
            };
            allocate_alpacaeval(session, reference)
        }
    }
}

/// Chooses the next tuple. UniCBE with greedy sampling and Random with
/// proportional sampling take paths that skip building the full tensor.
pub(crate) fn pick<R: rand::Rng + ?Sized>(
    session: &Session,
    strategy: &Strategy,
    sampler: Sampler,
    rng: &mut R,
) -> Result<Tuple, AllocError> {
    match (strategy, sampler) {
        (Strategy::UniCbe(w), Sampler::Greedy) => unicbe::greedy_pick(session, *w, rng),
        (Strategy::Random, Sampler::Probabilistic) => baselines::uniform_pick(session, rng),
        _ => {
            let tensor = allocate(session, strategy)?;
            let idx = sampler.sample(&tensor, rng)?;
            Ok(tensor.tuple(idx))
        }
    }
}

/// Active pairs (lower index first, lexicographic) and active samples,
/// with the eligibility mask: not yet judged and not blocked.
pub(crate) fn eligible_shape(
    session: &Session,
) -> Result<(Vec<(ModelId, ModelId)>, Vec<SampleId>, Vec<bool>), AllocError> {
    let models = session.active_models();
    if models.len() < 2 {
        return Err(AllocError::TooFewModels);
    }
    let samples = session.active_samples();
    if samples.is_empty() {
        return Err(AllocError::NoSamples);
    }
    let mut pairs = Vec::with_capacity(models.len() * (models.len() - 1) / 2);
    for (x, &a) in models.iter().enumerate() {
        for &b in &models[x + 1..] {
            pairs.push((a, b));
        }
    }
    let ledger = session.ledger();
    let check_blocked = session.has_blocked();
    let mut mask = Vec::with_capacity(pairs.len() * samples.len());
    for &(a, b) in &pairs {
        let p = crate::session::pair_index(a.index(), b.index());
        for &k in &samples {
            let mut ok = ledger.count_by_pair(p, k.index()) == 0;
            if ok && check_blocked {
                ok = !session.is_blocked(Tuple::new(a, b, k));
            }
            mask.push(ok);
        }
    }
    if !mask.iter().any(|m| *m) {
        return Err(AllocError::Exhausted);
    }
    Ok((pairs, samples, mask))
}
