//! Evaluation state: registered models and samples, the comparison ledger,
//! running win-rate statistics and the allocate → judge → record loop.

mod ids;
mod ledger;
mod stats;

use std::collections::HashSet;

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ids::{pair_count, pair_index, ModelId, Registry, SampleId};
pub use ledger::{ComparisonLedger, CountSnapshot, PreferenceRecord, DENSE_MODEL_LIMIT};
pub use stats::{StatsPrior, WinRateStats};

use crate::aggregation::Aggregator;
use crate::allocation::{self, AllocError, Sampler, Strategy, Tuple};
use crate::judges::{Judge, JudgeError, ListwiseJudge};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("unknown model {0}")]
    UnknownModel(ModelId),
    #[error("unknown sample {0}")]
    UnknownSample(SampleId),
    #[error("a model cannot be compared with itself ({0})")]
    SamePair(ModelId),
    #[error("preference {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("duplicate name {0:?}")]
    DuplicateName(String),
    #[error("removing {0} would leave fewer than two active models")]
    TooFewModels(ModelId),
    #[error("removing {0} would leave no active samples")]
    NoSamples(SampleId),
}

/// Strategy, tuple sampler, aggregator and statistics prior of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub strategy: Strategy,
    pub sampler: Sampler,
    pub aggregator: Aggregator,
    #[serde(default)]
    pub prior: StatsPrior,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::default(),
            sampler: Sampler::Greedy,
            aggregator: Aggregator::default(),
            prior: StatsPrior::default(),
        }
    }
}

/// What one call to [`Session::step`] did.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Recorded(PreferenceRecord),
    /// Every eligible tuple has been judged, blocked or is pending.
    Exhausted,
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Session(#[from] SessionError),
}

/// A single-writer evaluation session.
///
/// The ledger and the statistics are only ever updated together through
/// [`Session::record`], so the statistics are always a replay of the log.
#[derive(Debug, Clone)]
pub struct Session {
    models: Registry,
    samples: Registry,
    ledger: ComparisonLedger,
    stats: WinRateStats,
    config: SessionConfig,
    seed: u64,
    rng: StdRng,
    blocked: HashSet<Tuple>,
    steps: u64,
}

impl Session {
    pub fn new(models: Registry, samples: Registry, config: SessionConfig, seed: u64) -> Self {
        let ledger = ComparisonLedger::new(models.len(), samples.len());
        let stats = WinRateStats::new(models.len(), config.prior);
        Self {
            models,
            samples,
            ledger,
            stats,
            config,
            seed,
            rng: StdRng::seed_from_u64(seed),
            blocked: HashSet::new(),
            steps: 0,
        }
    }

    /// Session over `m` models named `m0..` and `n` samples named `s0..`.
    pub fn with_sizes(m: usize, n: usize, config: SessionConfig, seed: u64) -> Self {
        let models = Registry::with_names((0..m).map(|i| format!("m{i}"))).expect("unique");
        let samples = Registry::with_names((0..n).map(|k| format!("s{k}"))).expect("unique");
        Self::new(models, samples, config, seed)
    }

    /// Fresh session with the same registrations and config, fed `records` in order.
    pub fn replay(&self, records: &[PreferenceRecord]) -> Result<Self, SessionError> {
        let mut s = Self::new(
            self.models.clone(),
            self.samples.clone(),
            self.config.clone(),
            self.seed,
        );
        for rec in records {
            s.record(*rec)?;
        }
        Ok(s)
    }

    pub fn models(&self) -> &Registry {
        &self.models
    }

    pub fn samples(&self) -> &Registry {
        &self.samples
    }

    pub fn ledger(&self) -> &ComparisonLedger {
        &self.ledger
    }

    pub fn stats(&self) -> &WinRateStats {
        &self.stats
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn config_mut(&mut self) -> &mut SessionConfig {
        &mut self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng_mut(&mut self) -> &mut StdRng {
        &mut self.rng
    }

    pub fn records(&self) -> &[PreferenceRecord] {
        self.ledger.records()
    }

    pub fn budget_used(&self) -> u64 {
        self.ledger.budget_used()
    }

    /// Number of allocate → judge → record iterations so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn active_models(&self) -> Vec<ModelId> {
        self.models.active_indices().into_iter().map(ModelId).collect()
    }

    pub fn active_samples(&self) -> Vec<SampleId> {
        self.samples.active_indices().into_iter().map(SampleId).collect()
    }

    /// Full-traversal budget over the active sets: `N · M (M − 1) / 2`.
    pub fn full_budget(&self) -> u64 {
        (self.samples.active_count() * pair_count(self.models.active_count())) as u64
    }

    pub fn add_model(&mut self, name: impl Into<String>) -> Result<ModelId, SessionError> {
        let id = self.models.register(name)?;
        self.ledger.resize(self.models.len(), self.samples.len());
        self.stats.resize(self.models.len());
        Ok(ModelId(id))
    }

    pub fn add_sample(&mut self, name: impl Into<String>) -> Result<SampleId, SessionError> {
        let id = self.samples.register(name)?;
        self.ledger.resize(self.models.len(), self.samples.len());
        Ok(SampleId(id))
    }

    pub fn remove_model(&mut self, id: ModelId) -> Result<(), SessionError> {
        if !self.models.is_active(id.0) {
            return Err(SessionError::UnknownModel(id));
        }
        if self.models.active_count() <= 2 {
            return Err(SessionError::TooFewModels(id));
        }
        self.models.deactivate(id.0);
        Ok(())
    }

    pub fn remove_sample(&mut self, id: SampleId) -> Result<(), SessionError> {
        if !self.samples.is_active(id.0) {
            return Err(SessionError::UnknownSample(id));
        }
        if self.samples.active_count() <= 1 {
            return Err(SessionError::NoSamples(id));
        }
        self.samples.deactivate(id.0);
        Ok(())
    }

    /// Applies one judgment to the ledger and the statistics.
    pub fn record(&mut self, rec: PreferenceRecord) -> Result<(), SessionError> {
        if !self.models.contains(rec.a.0) {
            return Err(SessionError::UnknownModel(rec.a));
        }
        if !self.models.contains(rec.b.0) {
            return Err(SessionError::UnknownModel(rec.b));
        }
        if !self.samples.contains(rec.sample.0) {
            return Err(SessionError::UnknownSample(rec.sample));
        }
        if rec.a == rec.b {
            return Err(SessionError::SamePair(rec.a));
        }
        if !(0.0..=1.0).contains(&rec.r) {
            return Err(SessionError::OutOfRange(rec.r));
        }
        self.ledger.push(rec);
        self.stats.observe(rec.a, rec.b, rec.r);
        Ok(())
    }

    pub fn is_judged(&self, t: Tuple) -> bool {
        self.ledger.count(t.a, t.b, t.sample) > 0
    }

    /// Excludes a tuple from allocation until [`Session::unblock`].
    pub fn block(&mut self, t: Tuple) {
        self.blocked.insert(t.canonical());
    }

    pub fn unblock(&mut self, t: Tuple) {
        self.blocked.remove(&t.canonical());
    }

    pub fn is_blocked(&self, t: Tuple) -> bool {
        !self.blocked.is_empty() && self.blocked.contains(&t.canonical())
    }

    pub fn has_blocked(&self) -> bool {
        !self.blocked.is_empty()
    }

    /// Runs the configured strategy and sampler to choose the next tuple.
    pub fn next_tuple(&mut self) -> Result<Tuple, AllocError> {
        let strategy = self.config.strategy;
        let sampler = self.config.sampler;
        let mut rng = std::mem::replace(&mut self.rng, StdRng::from_seed([0; 32]));
        let out = allocation::pick(self, &strategy, sampler, &mut rng);
        self.rng = rng;
        out
    }

    /// Records the preference `r` for a tuple chosen by [`Session::next_tuple`]
    /// and advances the iteration counter, exactly as [`Session::step`] does.
    pub fn record_judgment(&mut self, t: Tuple, r: f64) -> Result<PreferenceRecord, SessionError> {
        let rec = PreferenceRecord::new(t.a, t.b, t.sample, r).at(self.steps);
        self.record(rec)?;
        self.steps += 1;
        Ok(rec)
    }

    /// One allocate → judge → record iteration. Tuples the judge cannot
    /// answer are blocked and allocation is retried.
    pub fn step(&mut self, judge: &mut dyn Judge) -> Result<StepOutcome, StepError> {
        loop {
            let tuple = match self.next_tuple() {
                Ok(t) => t,
                Err(AllocError::Exhausted) => return Ok(StepOutcome::Exhausted),
                Err(e) => return Err(e.into()),
            };
            match judge.judge(tuple)? {
                Some(r) => return Ok(StepOutcome::Recorded(self.record_judgment(tuple, r)?)),
                None => self.block(tuple),
            }
        }
    }

    /// One list-wise iteration: choose `k` models and a sample, obtain a
    /// ranking, and record its pairwise expansion (lower index first).
    pub fn step_listwise(
        &mut self,
        judge: &mut dyn ListwiseJudge,
        k: usize,
    ) -> Result<Option<Vec<PreferenceRecord>>, StepError> {
        let (models, sample) = match allocation::allocate_listwise(self, k) {
            Ok(c) => c,
            Err(AllocError::Exhausted) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let ranking = judge.rank(&models, sample)?;
        let records: Vec<_> = crate::judges::listwise_expand(&ranking, sample)?
            .into_iter()
            .map(|r| r.canonical().at(self.steps))
            .collect();
        for rec in &records {
            self.record(*rec)?;
        }
        self.steps += 1;
        Ok(Some(records))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn session() -> Session {
        Session::with_sizes(3, 2, SessionConfig::default(), 7)
    }

    #[test]
    fn record_rejects_bad_input() {
        let mut s = session();
        let ok = PreferenceRecord::new(ModelId(0), ModelId(1), SampleId(0), 1.0);
        assert!(s.record(ok).is_ok());
        let same = PreferenceRecord::new(ModelId(1), ModelId(1), SampleId(0), 1.0);
        assert_eq!(s.record(same), Err(SessionError::SamePair(ModelId(1))));
        let unknown = PreferenceRecord::new(ModelId(0), ModelId(9), SampleId(0), 1.0);
        assert_eq!(s.record(unknown), Err(SessionError::UnknownModel(ModelId(9))));
        let bad_sample = PreferenceRecord::new(ModelId(0), ModelId(1), SampleId(5), 1.0);
        assert_eq!(s.record(bad_sample), Err(SessionError::UnknownSample(SampleId(5))));
        let bad_r = PreferenceRecord::new(ModelId(0), ModelId(1), SampleId(0), 1.5);
        assert_eq!(s.record(bad_r), Err(SessionError::OutOfRange(1.5)));
        assert_eq!(s.budget_used(), 1);
    }

    #[test]
    fn replay_reproduces_stats() {
        let mut s = session();
        for (a, b, k, r) in [(0, 1, 0, 1.0), (2, 1, 1, 0.5), (1, 0, 1, 0.0), (0, 2, 0, 1.0)] {
            s.record(PreferenceRecord::new(ModelId(a), ModelId(b), SampleId(k), r))
                .unwrap();
        }
        let again = s.replay(s.records()).unwrap();
        assert!(again.stats().bitwise_eq(s.stats()));
        assert_eq!(again.ledger().snapshot_counts(), s.ledger().snapshot_counts());
    }

    #[test]
    fn removal_keeps_two_models_and_one_sample() {
        let mut s = session();
        s.remove_model(ModelId(2)).unwrap();
        assert_eq!(s.remove_model(ModelId(1)), Err(SessionError::TooFewModels(ModelId(1))));
        s.remove_sample(SampleId(0)).unwrap();
        assert_eq!(s.remove_sample(SampleId(1)), Err(SessionError::NoSamples(SampleId(1))));
        assert_eq!(s.full_budget(), 1);
    }

    #[test]
    fn growth_extends_ledger_and_stats() {
        let mut s = session();
        let m = s.add_model("late").unwrap();
        let k = s.add_sample("extra").unwrap();
        s.record(PreferenceRecord::new(m, ModelId(0), k, 1.0)).unwrap();
        assert_eq!(s.ledger().count(ModelId(0), m, k), 1);
        assert_eq!(s.stats().phi(m, ModelId(0)), 1.0);
        assert_eq!(s.full_budget(), 3 * 6);
    }
}
