use crate::session::{ModelId, SampleId};

use super::{AllocError, AllocationNote, Tuple};

/// Sampling weights over `(pair, sample)` tuples, stored in log space.
///
/// Entries are laid out pair-major: index `p * samples.len() + s`. Pairs
/// are unordered with the lower model index first. A masked entry is never
/// eligible; an eligible entry may still carry zero weight (`-inf` log).
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingTensor {
    pairs: Vec<(ModelId, ModelId)>,
    samples: Vec<SampleId>,
    log_weights: Vec<f64>,
    mask: Vec<bool>,
    note: Option<AllocationNote>,
}

impl SamplingTensor {
    /// Builds from log weights; masked entries are forced to `-inf`.
    pub fn from_log_weights(
        pairs: Vec<(ModelId, ModelId)>,
        samples: Vec<SampleId>,
        mut log_weights: Vec<f64>,
        mask: Vec<bool>,
    ) -> Self {
        assert_eq!(log_weights.len(), pairs.len() * samples.len());
        assert_eq!(mask.len(), log_weights.len());
        for (lw, &m) in log_weights.iter_mut().zip(&mask) {
            if !m || lw.is_nan() {
                *lw = f64::NEG_INFINITY;
            }
        }
        Self {
            pairs,
            samples,
            log_weights,
            mask,
            note: None,
        }
    }

    /// Builds from nonnegative linear weights.
    pub fn from_weights(
        pairs: Vec<(ModelId, ModelId)>,
        samples: Vec<SampleId>,
        weights: &[f64],
        mask: Vec<bool>,
    ) -> Self {
        let lw = weights.iter().map(|&w| w.max(0.0).ln()).collect();
        Self::from_log_weights(pairs, samples, lw, mask)
    }

    /// Equal weight on every unmasked entry.
    pub fn uniform(pairs: Vec<(ModelId, ModelId)>, samples: Vec<SampleId>, mask: Vec<bool>) -> Self {
        let lw = vec![0.0; mask.len()];
        Self::from_log_weights(pairs, samples, lw, mask)
    }

    /// Flat list of weights over tuples `0..len`, every entry eligible, for
    /// exercising samplers directly. Tuples are synthetic `(0, 1, k)`.
    pub fn from_flat(weights: &[f64]) -> Self {
        let samples = (0..weights.len() as u32).map(SampleId).collect();
        Self::from_weights(
            vec![(ModelId(0), ModelId(1))],
            samples,
            weights,
            vec![true; weights.len()],
        )
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn pairs(&self) -> &[(ModelId, ModelId)] {
        &self.pairs
    }

    pub fn samples(&self) -> &[SampleId] {
        &self.samples
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn note(&self) -> Option<AllocationNote> {
        self.note
    }

    pub(crate) fn with_note(mut self, note: AllocationNote) -> Self {
        self.note = Some(note);
        self
    }

    pub fn index_of(&self, pair: usize, sample: usize) -> usize {
        pair * self.samples.len() + sample
    }

    pub fn tuple(&self, idx: usize) -> Tuple {
        let n = self.samples.len();
        let (a, b) = self.pairs[idx / n];
        Tuple {
            a,
            b,
            sample: self.samples[idx % n],
        }
    }

    /// Position of `t` in this tensor, if present.
    pub fn position(&self, t: Tuple) -> Option<usize> {
        let t = t.canonical();
        let p = self.pairs.iter().position(|&(a, b)| a == t.a && b == t.b)?;
        let s = self.samples.iter().position(|&k| k == t.sample)?;
        Some(self.index_of(p, s))
    }

    pub fn eligible_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Whether any eligible entry has positive weight.
    pub fn has_mass(&self) -> bool {
        self.log_weights.iter().any(|lw| *lw > f64::NEG_INFINITY)
    }

    pub fn max_log_weight(&self) -> f64 {
        self.log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Normalized probabilities; all zero when there is no mass.
    pub fn weights(&self) -> Vec<f64> {
        let max = self.max_log_weight();
        if max == f64::NEG_INFINITY {
            return vec![0.0; self.len()];
        }
        let raw: Vec<f64> = self.log_weights.iter().map(|lw| (lw - max).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }

    /// Normalized probability mass of each pair.
    pub fn pair_mass(&self) -> Vec<f64> {
        let n = self.samples.len();
        let w = self.weights();
        (0..self.pairs.len())
            .map(|p| w[p * n..(p + 1) * n].iter().sum())
            .collect()
    }

    /// Same entries with the intersection of both masks.
    pub fn restrict(&self, mask: &[bool]) -> Result<Self, AllocError> {
        if mask.len() != self.len() {
            return Err(AllocError::ShapeMismatch);
        }
        let combined = self.mask.iter().zip(mask).map(|(a, b)| *a && *b).collect();
        let mut out = Self::from_log_weights(
            self.pairs.clone(),
            self.samples.clone(),
            self.log_weights.clone(),
            combined,
        );
        out.note = self.note;
        Ok(out)
    }

    pub(crate) fn same_shape(&self, other: &Self) -> bool {
        self.pairs == other.pairs && self.samples == other.samples && self.mask == other.mask
    }
}
