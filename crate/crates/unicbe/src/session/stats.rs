//! Per-pair win-rate statistics.
//!
//! The win-rate matrix, its variance and the uncertainty of each entry are
//! kept as per-pair empirical moments of the observed outcomes. With
//! outcomes oriented as "row beats column", the mean of a pair's outcomes is
//! its estimated win rate and the population variance of those outcomes,
//! divided by the pair's count, is the squared uncertainty of that estimate.

use serde::{Deserialize, Serialize};

use super::ids::{pair_count, pair_index, ModelId};
use super::SessionError;

/// Variance assigned to pairs with fewer than two observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsPrior {
    pub variance: f64,
}

impl Default for StatsPrior {
    fn default() -> Self {
        Self { variance: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct PairMoments {
    n: u64,
    /// Running mean of `r` oriented as lower index beats higher index.
    mean: f64,
    /// Running sum of squared deviations (Welford).
    m2: f64,
}

impl PairMoments {
    fn push(&mut self, r: f64) {
        self.n += 1;
        let delta = r - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (r - self.mean);
    }
}

/// Running estimates of win rate (`phi`), outcome variance (`theta`) and
/// win-rate uncertainty (`epsilon`) for every model pair.
#[derive(Debug, Clone)]
pub struct WinRateStats {
    models: usize,
    prior: StatsPrior,
    pairs: Vec<PairMoments>,
}

impl WinRateStats {
    pub fn new(models: usize, prior: StatsPrior) -> Self {
        Self {
            models,
            prior,
            pairs: vec![PairMoments::default(); pair_count(models)],
        }
    }

    pub fn resize(&mut self, models: usize) {
        if models > self.models {
            self.models = models;
            self.pairs.resize(pair_count(models), PairMoments::default());
        }
    }

    pub fn models(&self) -> usize {
        self.models
    }

    pub fn prior(&self) -> StatsPrior {
        self.prior
    }

    /// Folds one outcome, `r` = degree `a` beats `b`.
    pub fn observe(&mut self, a: ModelId, b: ModelId, r: f64) {
        let p = pair_index(a.index(), b.index());
        let oriented = if a < b { r } else { 1.0 - r };
        self.pairs[p].push(oriented);
    }

    fn moments(&self, i: ModelId, j: ModelId) -> &PairMoments {
        &self.pairs[pair_index(i.index(), j.index())]
    }

    /// Number of observations of the pair.
    pub fn n(&self, i: ModelId, j: ModelId) -> u64 {
        if i == j {
            return 0;
        }
        self.moments(i, j).n
    }

    /// Estimated probability that `i` beats `j`; 0.5 on the diagonal and for
    /// unobserved pairs. `phi(i, j) + phi(j, i) == 1` exactly.
    pub fn phi(&self, i: ModelId, j: ModelId) -> f64 {
        if i == j {
            return 0.5;
        }
        let mm = self.moments(i, j);
        if mm.n == 0 {
            return 0.5;
        }
        let lower_wins = mm.mean.clamp(0.0, 1.0);
        // The larger of the two orientations is stored exactly and the smaller
        // derived from it, so the complement is exact in floating point.
        let (big, lower_is_big) = if lower_wins >= 0.5 {
            (lower_wins, true)
        } else {
            (1.0 - lower_wins, false)
        };
        let small = 1.0 - big;
        let i_is_lower = i < j;
        if i_is_lower == lower_is_big {
            big
        } else {
            small
        }
    }

    /// Outcome variance of the pair (population form); the prior below two
    /// observations.
    pub fn theta(&self, i: ModelId, j: ModelId) -> f64 {
        if i == j {
            return 0.0;
        }
        let mm = self.moments(i, j);
        if mm.n < 2 {
            self.prior.variance
        } else {
            (mm.m2 / mm.n as f64).clamp(0.0, 0.25)
        }
    }

    /// Standard deviation of the estimated win rate: `sqrt(theta / max(n, 1))`.
    pub fn epsilon(&self, i: ModelId, j: ModelId) -> f64 {
        if i == j {
            return 0.0;
        }
        let n = self.n(i, j).max(1);
        (self.theta(i, j) / n as f64).sqrt()
    }

    /// `epsilon` with the prior variance counted as one extra observation:
    /// `sqrt((n·theta + prior) / (n + 1) / max(n, 1))`. Equal to `epsilon`
    /// below two observations; stays positive when every outcome agreed.
    pub fn smoothed_epsilon(&self, i: ModelId, j: ModelId) -> f64 {
        if i == j {
            return 0.0;
        }
        let n = self.n(i, j);
        let theta = (n as f64 * self.theta(i, j) + self.prior.variance) / (n + 1) as f64;
        (theta / n.max(1) as f64).sqrt()
    }

    /// Reduction of `epsilon(i, j)` that one more observation would bring.
    pub fn uncertainty_reduction(&self, i: ModelId, j: ModelId) -> Result<f64, SessionError> {
        if i == j {
            return Err(SessionError::SamePair(i));
        }
        let n = self.n(i, j);
        let theta = self.theta(i, j);
        Ok(if n == 0 {
            self.prior.variance.sqrt() - (self.prior.variance / 2.0).sqrt()
        } else {
            let n = n as f64;
            ((theta / n).sqrt() - (theta / (n + 1.0)).sqrt()).max(0.0)
        })
    }

    /// Dense `phi` matrix over the first `models` indices.
    pub fn phi_matrix(&self) -> Vec<Vec<f64>> {
        self.dense(|i, j| self.phi(i, j))
    }

    pub fn theta_matrix(&self) -> Vec<Vec<f64>> {
        self.dense(|i, j| self.theta(i, j))
    }

    pub fn epsilon_matrix(&self) -> Vec<Vec<f64>> {
        self.dense(|i, j| self.epsilon(i, j))
    }

    pub fn count_matrix(&self) -> Vec<Vec<u64>> {
        let m = self.models;
        (0..m)
            .map(|i| (0..m).map(|j| self.n(ModelId(i as u32), ModelId(j as u32))).collect())
            .collect()
    }

    fn dense(&self, f: impl Fn(ModelId, ModelId) -> f64) -> Vec<Vec<f64>> {
        let m = self.models as u32;
        (0..m)
            .map(|i| (0..m).map(|j| f(ModelId(i), ModelId(j))).collect())
            .collect()
    }

    /// Bit-level equality of every stored moment.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        self.models == other.models
            && self.pairs.len() == other.pairs.len()
            && self.pairs.iter().zip(&other.pairs).all(|(a, b)| {
                a.n == b.n
                    && a.mean.to_bits() == b.mean.to_bits()
                    && a.m2.to_bits() == b.m2.to_bits()
            })
    }
}
