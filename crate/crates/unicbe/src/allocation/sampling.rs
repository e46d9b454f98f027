use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AllocError, SamplingTensor};

/// Rule turning a sampling tensor into one tuple index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Highest weight; ties broken uniformly at random.
    Greedy,
    /// Draw proportionally to the weights.
    Probabilistic,
    /// Draw proportionally to `weight^(1/T)`: `T = 0` is greedy, `T = 1`
    /// probabilistic, `T → ∞` uniform over the positive-weight support.
    Temperature(f64),
}

impl Sampler {
    pub fn sample<R: Rng + ?Sized>(&self, p: &SamplingTensor, rng: &mut R) -> Result<usize, AllocError> {
        self.sample_log(p.log_weights(), p.mask(), rng)
    }

    /// Samples from raw log weights; `-inf` or masked entries are ineligible.
    pub(crate) fn sample_log<R: Rng + ?Sized>(
        &self,
        log_weights: &[f64],
        mask: &[bool],
        rng: &mut R,
    ) -> Result<usize, AllocError> {
        match *self {
            Sampler::Greedy => greedy_index(log_weights, mask, rng).ok_or(AllocError::Exhausted),
            Sampler::Probabilistic => tempered(log_weights, mask, 1.0, rng),
            Sampler::Temperature(t) => {
                if t.is_nan() || t < 0.0 {
                    Err(AllocError::InvalidTemperature(t))
                } else if t == 0.0 {
                    greedy_index(log_weights, mask, rng).ok_or(AllocError::Exhausted)
                } else {
                    tempered(log_weights, mask, t, rng)
                }
            }
        }
    }
}

/// Index of a maximal entry among `mask`; uniform over ties.
pub(crate) fn greedy_index<R: Rng + ?Sized>(log_weights: &[f64], mask: &[bool], rng: &mut R) -> Option<usize> {
    let mut best = f64::NEG_INFINITY;
    let mut ties: Vec<usize> = Vec::new();
    for (i, (&lw, &ok)) in log_weights.iter().zip(mask).enumerate() {
        if !ok || lw == f64::NEG_INFINITY {
            continue;
        }
        if lw > best {
            best = lw;
            ties.clear();
            ties.push(i);
        } else if lw == best {
            ties.push(i);
        }
    }
    match ties.len() {
        0 => None,
        1 => Some(ties[0]),
        n => Some(ties[rng.random_range(0..n)]),
    }
}

pub fn sample_greedy<R: Rng + ?Sized>(p: &SamplingTensor, rng: &mut R) -> Result<usize, AllocError> {
    Sampler::Greedy.sample(p, rng)
}

pub fn sample_probabilistic<R: Rng + ?Sized>(p: &SamplingTensor, rng: &mut R) -> Result<usize, AllocError> {
    Sampler::Probabilistic.sample(p, rng)
}

pub fn sample_temperature<R: Rng + ?Sized>(
    p: &SamplingTensor,
    temperature: f64,
    rng: &mut R,
) -> Result<usize, AllocError> {
    Sampler::Temperature(temperature).sample(p, rng)
}

/// Draw proportional to `exp(lw / T)`; `T = ∞` is uniform over the support.
fn tempered<R: Rng + ?Sized>(log_weights: &[f64], mask: &[bool], temperature: f64, rng: &mut R) -> Result<usize, AllocError> {
    let max = log_weights
        .iter()
        .zip(mask)
        .filter(|(_, ok)| **ok)
        .map(|(lw, _)| *lw)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(AllocError::Exhausted);
    }
    let w: Vec<f64> = log_weights
        .iter()
        .zip(mask)
        .map(|(&lw, &ok)| {
            if !ok || lw == f64::NEG_INFINITY {
                0.0
            } else if temperature.is_infinite() {
                1.0
            } else {
                ((lw - max) / temperature).exp()
            }
        })
        .collect();
    let dist = WeightedIndex::new(&w).map_err(|_| AllocError::Exhausted)?;
    Ok(dist.sample(rng))
}
