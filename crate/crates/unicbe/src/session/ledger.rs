use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ids::{pair_count, pair_index, ModelId, SampleId};

/// Above this many models the per-tuple counts move to a sparse map.
pub const DENSE_MODEL_LIMIT: usize = 64;

/// One judgment: `r` is the degree to which `a` beats `b` on `sample`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub a: ModelId,
    pub b: ModelId,
    pub sample: SampleId,
    pub r: f64,
    #[serde(default)]
    pub iteration: u64,
}

impl PreferenceRecord {
    pub fn new(a: ModelId, b: ModelId, sample: SampleId, r: f64) -> Self {
        Self {
            a,
            b,
            sample,
            r,
            iteration: 0,
        }
    }

    pub fn at(mut self, iteration: u64) -> Self {
        self.iteration = iteration;
        self
    }

    /// Outcome from the point of view of `model`, if it took part.
    pub fn score_for(&self, model: ModelId) -> Option<f64> {
        if model == self.a {
            Some(self.r)
        } else if model == self.b {
            Some(1.0 - self.r)
        } else {
            None
        }
    }

    /// Same judgment with the lower model index first.
    pub fn canonical(&self) -> Self {
        if self.a <= self.b {
            *self
        } else {
            Self {
                a: self.b,
                b: self.a,
                r: 1.0 - self.r,
                ..*self
            }
        }
    }
}

#[derive(Debug, Clone)]
enum CountStore {
    /// `[pair_index][sample]`
    Dense(Vec<Vec<u32>>),
    Sparse(HashMap<(u32, u32), u32>),
}

impl CountStore {
    fn get(&self, pair: usize, sample: usize) -> u32 {
        match self {
            CountStore::Dense(rows) => rows
                .get(pair)
                .and_then(|r| r.get(sample))
                .copied()
                .unwrap_or(0),
            CountStore::Sparse(map) => map
                .get(&(pair as u32, sample as u32))
                .copied()
                .unwrap_or(0),
        }
    }

    fn increment(&mut self, pair: usize, sample: usize) {
        match self {
            CountStore::Dense(rows) => rows[pair][sample] += 1,
            CountStore::Sparse(map) => *map.entry((pair as u32, sample as u32)).or_insert(0) += 1,
        }
    }
}

/// Per-tuple judgment counts plus the append-only record log.
///
/// `count(i, j, k)` is symmetric in the model indices and zero on the
/// diagonal. Marginals over samples and opponents are kept incrementally.
#[derive(Debug, Clone)]
pub struct ComparisonLedger {
    models: usize,
    samples: usize,
    store: CountStore,
    pair_totals: Vec<u64>,
    model_sample: Vec<Vec<u32>>,
    model_totals: Vec<u64>,
    sample_totals: Vec<u64>,
    records: Vec<PreferenceRecord>,
}

/// Marginals of the count tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSnapshot {
    /// `pair_counts[i][j] = Σ_k C[i][j][k]`, symmetric.
    pub pair_counts: Vec<Vec<u64>>,
    /// `model_sample_counts[i][k] = Σ_j C[i][j][k]`.
    pub model_sample_counts: Vec<Vec<u32>>,
    /// `model_totals[i] = Σ_j Σ_k C[i][j][k]`.
    pub model_totals: Vec<u64>,
}

impl Default for ComparisonLedger {
    fn default() -> Self {
        Self::new(0, 0)
    }
}

impl ComparisonLedger {
    pub fn new(models: usize, samples: usize) -> Self {
        let mut ledger = Self {
            models: 0,
            samples: 0,
            store: CountStore::Dense(Vec::new()),
            pair_totals: Vec::new(),
            model_sample: Vec::new(),
            model_totals: Vec::new(),
            sample_totals: Vec::new(),
            records: Vec::new(),
        };
        ledger.resize(models, samples);
        ledger
    }

    /// Grows the tensor to at least `models × models × samples`. Never shrinks.
    pub fn resize(&mut self, models: usize, samples: usize) {
        let models = models.max(self.models);
        let samples = samples.max(self.samples);
        if models > DENSE_MODEL_LIMIT {
            if let CountStore::Dense(rows) = &self.store {
                let mut map = HashMap::new();
                for (p, row) in rows.iter().enumerate() {
                    for (k, &c) in row.iter().enumerate() {
                        if c > 0 {
                            map.insert((p as u32, k as u32), c);
                        }
                    }
                }
                self.store = CountStore::Sparse(map);
            }
        }
        if let CountStore::Dense(rows) = &mut self.store {
            for row in rows.iter_mut() {
                row.resize(samples, 0);
            }
            rows.resize_with(pair_count(models), || vec![0; samples]);
        }
        self.pair_totals.resize(pair_count(models), 0);
        for row in self.model_sample.iter_mut() {
            row.resize(samples, 0);
        }
        self.model_sample.resize_with(models, || vec![0; samples]);
        self.model_totals.resize(models, 0);
        self.sample_totals.resize(samples, 0);
        self.models = models;
        self.samples = samples;
    }

    pub fn models(&self) -> usize {
        self.models
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.store, CountStore::Dense(_))
    }

    /// `C[i][j][k]`.
    pub fn count(&self, i: ModelId, j: ModelId, k: SampleId) -> u32 {
        if i == j {
            return 0;
        }
        self.store.get(pair_index(i.index(), j.index()), k.index())
    }

    /// `C` addressed by unordered pair index.
    pub fn count_by_pair(&self, pair: usize, k: usize) -> u32 {
        self.store.get(pair, k)
    }

    pub fn pair_total(&self, i: ModelId, j: ModelId) -> u64 {
        if i == j {
            return 0;
        }
        self.pair_totals[pair_index(i.index(), j.index())]
    }

    pub fn pair_total_by_index(&self, pair: usize) -> u64 {
        self.pair_totals[pair]
    }

    pub fn model_sample_count(&self, i: ModelId, k: SampleId) -> u32 {
        self.model_sample[i.index()][k.index()]
    }

    pub fn model_sample_row(&self, i: ModelId) -> &[u32] {
        &self.model_sample[i.index()]
    }

    pub fn model_total(&self, i: ModelId) -> u64 {
        self.model_totals[i.index()]
    }

    pub fn sample_total(&self, k: SampleId) -> u64 {
        self.sample_totals[k.index()]
    }

    pub fn records(&self) -> &[PreferenceRecord] {
        &self.records
    }

    pub fn budget_used(&self) -> u64 {
        self.records.len() as u64
    }

    /// Appends a record. The caller has validated ids and `r`.
    pub(crate) fn push(&mut self, rec: PreferenceRecord) {
        let (i, j, k) = (rec.a.index(), rec.b.index(), rec.sample.index());
        let p = pair_index(i, j);
        self.store.increment(p, k);
        self.pair_totals[p] += 1;
        self.model_sample[i][k] += 1;
        self.model_sample[j][k] += 1;
        self.model_totals[i] += 1;
        self.model_totals[j] += 1;
        self.sample_totals[k] += 1;
        self.records.push(rec);
    }

    /// Dense marginals of the count tensor.
    pub fn snapshot_counts(&self) -> CountSnapshot {
        let m = self.models;
        let mut pair_counts = vec![vec![0u64; m]; m];
        for j in 1..m {
            for i in 0..j {
                let c = self.pair_totals[pair_index(i, j)];
                pair_counts[i][j] = c;
                pair_counts[j][i] = c;
            }
        }
        CountSnapshot {
            pair_counts,
            model_sample_counts: self.model_sample.clone(),
            model_totals: self.model_totals.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(a: u32, b: u32, k: u32) -> PreferenceRecord {
        PreferenceRecord::new(ModelId(a), ModelId(b), SampleId(k), 1.0)
    }

    #[test]
    fn empty_snapshot_is_zero() {
        let l = ComparisonLedger::new(3, 2);
        let s = l.snapshot_counts();
        assert!(s.pair_counts.iter().flatten().all(|&c| c == 0));
        assert!(s.model_sample_counts.iter().flatten().all(|&c| c == 0));
        assert!(s.model_totals.iter().all(|&c| c == 0));
    }

    #[test]
    fn single_record_increments_marginals() {
        let mut l = ComparisonLedger::new(3, 2);
        l.push(rec(0, 1, 0));
        let s = l.snapshot_counts();
        assert_eq!(s.pair_counts[0][1], 1);
        assert_eq!(s.pair_counts[1][0], 1);
        assert_eq!(s.model_sample_counts[0][0], 1);
        assert_eq!(s.model_sample_counts[1][0], 1);
        assert_eq!(s.model_sample_counts[2][0], 0);
        assert_eq!(s.model_totals, vec![1, 1, 0]);
        assert_eq!(l.count(ModelId(1), ModelId(0), SampleId(0)), 1);
        assert_eq!(l.count(ModelId(1), ModelId(1), SampleId(0)), 0);
    }

    #[test]
    fn full_traversal_marginals() {
        let (m, n) = (5u32, 4u32);
        let mut l = ComparisonLedger::new(m as usize, n as usize);
        for k in 0..n {
            for i in 0..m {
                for j in (i + 1)..m {
                    l.push(rec(i, j, k));
                }
            }
        }
        let s = l.snapshot_counts();
        for i in 0..m as usize {
            for j in 0..m as usize {
                assert_eq!(s.pair_counts[i][j], if i == j { 0 } else { n as u64 });
            }
            assert_eq!(s.model_totals[i], ((m - 1) * n) as u64);
        }
        assert_eq!(l.budget_used(), (n * m * (m - 1) / 2) as u64);
    }

    #[test]
    fn sparse_store_above_dense_limit() {
        let mut l = ComparisonLedger::new(4, 3);
        l.push(rec(2, 3, 1));
        l.resize(DENSE_MODEL_LIMIT + 1, 3);
        assert!(!l.is_dense());
        assert_eq!(l.count(ModelId(3), ModelId(2), SampleId(1)), 1);
        l.push(rec(0, DENSE_MODEL_LIMIT as u32, 2));
        assert_eq!(
            l.count(ModelId(0), ModelId(DENSE_MODEL_LIMIT as u32), SampleId(2)),
            1
        );
    }

    #[test]
    fn canonical_flips_orientation() {
        let r = PreferenceRecord::new(ModelId(3), ModelId(1), SampleId(0), 0.25);
        let c = r.canonical();
        assert_eq!((c.a, c.b, c.r), (ModelId(1), ModelId(3), 0.75));
    }
}
