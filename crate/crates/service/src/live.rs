//! One annotation session: the library [`Session`], the texts shown to
//! annotators and the assignments handed out but not yet answered.

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use unicbe::aggregation::{normalize, Normalization};
use unicbe::allocation::{AllocError, Tuple};
use unicbe::metrics::beta_parts;
use unicbe::session::{ModelId, PreferenceRecord, Registry, SampleId};
use unicbe::{Sampler, Session, SessionConfig, Strategy};

use crate::api::{
    Assignment, Choice, CreateSession, Leaderboard, LeaderboardView, MissingResponse, PairRow, Progress, ScoreRow,
};
use crate::error::ServiceError;

#[derive(Debug, Clone)]
struct Pending {
    tuple: Tuple,
    /// `tuple.a` is shown on the right.
    swapped: bool,
    annotator: String,
    expires: Instant,
}

#[derive(Debug)]
pub struct LiveSession {
    pub id: String,
    pub spec: CreateSession,
    session: Session,
    /// `[sample]`
    instructions: Vec<String>,
    /// `[model][sample]`
    responses: Vec<Vec<String>>,
    pending: HashMap<String, Pending>,
    submitted: HashSet<String>,
    flips: StdRng,
    cached: Option<Leaderboard>,
}

/// Checks a creation payload; on success returns the instructions and the
/// response table in registration order.
fn validate(spec: &CreateSession) -> Result<(Vec<String>, Vec<Vec<String>>), ServiceError> {
    if spec.name.trim().is_empty() {
        return Err(ServiceError::invalid("name must not be empty"));
    }
    if spec.models.len() < 2 {
        return Err(ServiceError::invalid(format!(
            "need at least two models, got {}",
            spec.models.len()
        )));
    }
    if spec.samples.is_empty() {
        return Err(ServiceError::invalid("need at least one sample"));
    }
    if spec.refit_every == 0 {
        return Err(ServiceError::invalid("refit_every must be at least 1"));
    }
    let unique = |names: Vec<&str>, what: &str| {
        let mut seen = HashSet::new();
        match names.into_iter().find(|n| !seen.insert(*n)) {
            Some(dup) => Err(ServiceError::invalid(format!("duplicate {what} {dup:?}"))),
            None => Ok(()),
        }
    };
    unique(spec.models.iter().map(String::as_str).collect(), "model")?;
    unique(spec.samples.iter().map(|s| s.name.as_str()).collect(), "sample")?;
    if let Strategy::UniCbe(w) = &spec.strategy {
        w.validate().map_err(|e| ServiceError::invalid(e.to_string()))?;
    }
    if let Strategy::AlpacaEval { reference: Some(r) } = spec.strategy {
        if r.index() >= spec.models.len() {
            return Err(ServiceError::invalid(AllocError::UnknownReference(r).to_string()));
        }
    }
    if let Some(Sampler::Temperature(t)) = spec.sampler {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(ServiceError::invalid(AllocError::InvalidTemperature(t).to_string()));
        }
    }
    for model in spec.responses.keys() {
        if !spec.models.contains(model) {
            return Err(ServiceError::invalid(format!("responses name unknown model {model:?}")));
        }
    }

    let mut missing = Vec::new();
    let mut table = Vec::with_capacity(spec.models.len());
    for model in &spec.models {
        let row = spec.responses.get(model);
        if let Some(row) = row {
            if let Some(extra) = row.keys().find(|k| !spec.samples.iter().any(|s| &s.name == *k)) {
                return Err(ServiceError::invalid(format!(
                    "responses of {model:?} name unknown sample {extra:?}"
                )));
            }
        }
        let mut texts = Vec::with_capacity(spec.samples.len());
        for sample in &spec.samples {
            match row.and_then(|r| r.get(&sample.name)) {
                Some(text) => texts.push(text.clone()),
                None => missing.push(MissingResponse {
                    model: model.clone(),
                    sample: sample.name.clone(),
                }),
            }
        }
        table.push(texts);
    }
    if !missing.is_empty() {
        return Err(ServiceError::Invalid {
            message: format!("{} response(s) missing", missing.len()),
            missing,
        });
    }
    Ok((spec.samples.iter().map(|s| s.instruction.clone()).collect(), table))
}

/// The library session a creation payload describes.
pub fn library_session(spec: &CreateSession) -> Result<Session, ServiceError> {
    let models = Registry::with_names(spec.models.iter().cloned())?;
    let samples = Registry::with_names(spec.samples.iter().map(|s| s.name.clone()))?;
    let config = SessionConfig {
        strategy: spec.strategy,
        sampler: spec.sampler.unwrap_or_else(|| spec.strategy.default_sampler()),
        aggregator: spec.aggregator,
        ..SessionConfig::default()
    };
    Ok(Session::new(models, samples, config, spec.seed))
}

/// Scores, per-pair uncertainty and uniformity diagnostics of `session`;
/// depends only on its configuration and record log.
pub fn leaderboard(session: &Session) -> Result<Leaderboard, ServiceError> {
    let models = session.active_models();
    let samples = session.active_samples();
    let name = |m: ModelId| session.models().name(m.0).unwrap_or_default().to_string();
    let aggregator = session.config().aggregator;

    let (values, insufficient) = if session.records().is_empty() {
        (vec![1.0; models.len()], true)
    } else {
        let raw = aggregator.aggregate(session.records(), &models)?;
        let unscored = !raw.unscored.is_empty();
        (normalize(&raw, Normalization::MeanOne)?.values, unscored)
    };
    let mut order: Vec<usize> = (0..models.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let scores = order
        .iter()
        .enumerate()
        .map(|(rank, &i)| ScoreRow {
            model: name(models[i]),
            score: values[i],
            rank: rank + 1,
        })
        .collect();

    let stats = session.stats();
    let mut pairs = Vec::new();
    for (x, &a) in models.iter().enumerate() {
        for &b in &models[x + 1..] {
            pairs.push(PairRow {
                model_a: name(a),
                model_b: name(b),
                comparisons: stats.n(a, b),
                win_rate: stats.phi(a, b),
                epsilon: stats.epsilon(a, b),
            });
        }
    }
    let beta = beta_parts(session.ledger(), stats, &models, &samples);
    Ok(Leaderboard {
        aggregator: aggregator.kind(),
        insufficient_data: insufficient,
        scores,
        pairs,
        beta,
        budget_used: session.budget_used(),
        full_budget: session.full_budget(),
        fitted_at: session.budget_used(),
    })
}

/// Preference of `tuple.a` given the side the annotator picked.
fn preference(choice: Choice, swapped: bool) -> f64 {
    match (choice, swapped) {
        (Choice::Tie, _) => 0.5,
        (Choice::Left, false) | (Choice::Right, true) => 1.0,
        (Choice::Left, true) | (Choice::Right, false) => 0.0,
    }
}

impl LiveSession {
    pub fn create(id: String, spec: CreateSession) -> Result<Self, ServiceError> {
        let (instructions, responses) = validate(&spec)?;
        let session = library_session(&spec)?;
        Ok(Self {
            flips: StdRng::seed_from_u64(spec.seed ^ 0x6c65_6674_7269_6768),
            id,
            spec,
            session,
            instructions,
            responses,
            pending: HashMap::new(),
            submitted: HashSet::new(),
            cached: None,
        })
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Applies a logged judgment while rebuilding from disk.
    pub fn restore(&mut self, model_a: &str, model_b: &str, sample: &str, r: f64) -> Result<(), ServiceError> {
        let find = |reg: &Registry, n: &str, what: &str| {
            reg.find(n)
                .ok_or_else(|| ServiceError::store(format!("log names unknown {what} {n:?}")))
        };
        let a = ModelId(find(self.session.models(), model_a, "model")?);
        let b = ModelId(find(self.session.models(), model_b, "model")?);
        let k = SampleId(find(self.session.samples(), sample, "sample")?);
        self.session.record_judgment(Tuple::new(a, b, k), r)?;
        Ok(())
    }

    /// Returns expired assignments to the pool.
    pub fn expire(&mut self, now: Instant) {
        let expired: Vec<String> = self
            .pending
            .iter()
            .filter(|(_, p)| p.expires <= now)
            .map(|(id, _)| id.clone())
            .collect();
        for id in expired {
            if let Some(p) = self.pending.remove(&id) {
                self.session.unblock(p.tuple);
            }
        }
    }

    fn progress(&self) -> Progress {
        Progress {
            used: self.session.budget_used(),
            full: self.session.full_budget(),
        }
    }

    fn view(&self, id: &str, p: &Pending, now: Instant) -> Assignment {
        let t = p.tuple;
        let text = |m: ModelId| self.responses[m.index()][t.sample.index()].clone();
        let (left, right) = if p.swapped { (text(t.b), text(t.a)) } else { (text(t.a), text(t.b)) };
        Assignment {
            assignment: id.to_string(),
            instruction: self.instructions[t.sample.index()].clone(),
            left,
            right,
            progress: self.progress(),
            expires_in_secs: p.expires.saturating_duration_since(now).as_secs(),
        }
    }

    /// The annotator's open assignment, or a fresh one from the allocator;
    /// `None` once no tuple is free.
    pub fn next(&mut self, annotator: &str, now: Instant, ttl: Duration) -> Result<Option<Assignment>, ServiceError> {
        self.expire(now);
        if let Some((id, p)) = self.pending.iter().find(|(_, p)| p.annotator == annotator) {
            return Ok(Some(self.view(id, p, now)));
        }
        let tuple = match self.session.next_tuple() {
            Ok(t) => t,
            Err(AllocError::Exhausted) => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        self.session.block(tuple);
        let pending = Pending {
            tuple,
            swapped: self.flips.random(),
            annotator: annotator.to_string(),
            expires: now + ttl,
        };
        let id = uuid::Uuid::new_v4().to_string();
        let view = self.view(&id, &pending, now);
        self.pending.insert(id, pending);
        Ok(Some(view))
    }

    /// Records the answer to an open assignment and returns the record with
    /// the refreshed leaderboard.
    pub fn submit(
        &mut self,
        assignment: &str,
        choice: Choice,
        now: Instant,
    ) -> Result<(PreferenceRecord, LeaderboardView), ServiceError> {
        if self.submitted.contains(assignment) {
            return Err(ServiceError::AlreadySubmitted(assignment.to_string()));
        }
        self.expire(now);
        let p = self
            .pending
            .remove(assignment)
            .ok_or_else(|| ServiceError::Gone(assignment.to_string()))?;
        self.session.unblock(p.tuple);
        let rec = self.session.record_judgment(p.tuple, preference(choice, p.swapped))?;
        self.submitted.insert(assignment.to_string());

        let used = self.session.budget_used();
        let due = self.cached.is_none() || used % self.spec.refit_every == 0;
        let board = match (&self.cached, due) {
            (Some(c), false) => Leaderboard {
                budget_used: used,
                beta: beta_parts(
                    self.session.ledger(),
                    self.session.stats(),
                    &self.session.active_models(),
                    &self.session.active_samples(),
                ),
                ..c.clone()
            },
            _ => {
                let fresh = leaderboard(&self.session)?;
                self.cached = Some(fresh.clone());
                fresh
            }
        };
        Ok((
            rec,
            LeaderboardView {
                session: self.id.clone(),
                pending: self.pending.len(),
                leaderboard: board,
            },
        ))
    }

    /// Names of a record's models and sample, for logs and export.
    pub fn names(&self, rec: &PreferenceRecord) -> (String, String, String) {
        let m = self.session.models();
        let s = self.session.samples();
        (
            m.name(rec.a.0).unwrap_or_default().to_string(),
            m.name(rec.b.0).unwrap_or_default().to_string(),
            s.name(rec.sample.0).unwrap_or_default().to_string(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    use crate::api::SampleSpec;

    fn spec(models: &[&str], samples: &[&str]) -> CreateSession {
        let mut responses = BTreeMap::new();
        for m in models {
            let row: BTreeMap<String, String> = samples.iter().map(|s| (s.to_string(), format!("{m} on {s}"))).collect();
            responses.insert(m.to_string(), row);
        }
        CreateSession {
            name: "t".into(),
            models: models.iter().map(|m| m.to_string()).collect(),
            samples: samples
                .iter()
                .map(|s| SampleSpec {
                    name: s.to_string(),
                    instruction: format!("do {s}"),
                })
                .collect(),
            responses,
            strategy: Strategy::default(),
            sampler: None,
            aggregator: unicbe::Aggregator::default(),
            seed: 0,
            refit_every: 1,
        }
    }

    #[test]
    fn two_by_two_has_two_tuples() {
        let live = LiveSession::create("x".into(), spec(&["a", "b"], &["s1", "s2"])).unwrap();
        assert_eq!(live.session().full_budget(), 2);
    }

    #[test]
    fn missing_responses_are_listed() {
        let mut s = spec(&["a", "b"], &["s1", "s2"]);
        s.responses.get_mut("b").unwrap().remove("s2");
        match LiveSession::create("x".into(), s) {
            Err(ServiceError::Invalid { missing, .. }) => assert_eq!(
                missing,
                vec![MissingResponse {
                    model: "b".into(),
                    sample: "s2".into()
                }]
            ),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn one_model_is_rejected() {
        let err = LiveSession::create("x".into(), spec(&["a"], &["s1"])).unwrap_err();
        assert_eq!(err.status(), axum::http::StatusCode::UNPROCESSABLE_ENTITY);
    }

    #[test]
    fn sides_map_back_to_the_tuple() {
        assert_eq!(preference(Choice::Left, false), 1.0);
        assert_eq!(preference(Choice::Left, true), 0.0);
        assert_eq!(preference(Choice::Right, false), 0.0);
        assert_eq!(preference(Choice::Right, true), 1.0);
        assert_eq!(preference(Choice::Tie, true), 0.5);
    }

    #[test]
    fn left_choice_credits_the_model_shown_left() {
        let mut live = LiveSession::create("x".into(), spec(&["a", "b", "c"], &["s1", "s2"])).unwrap();
        let now = Instant::now();
        for _ in 0..6 {
            let asg = live.next("ann", now, Duration::from_secs(60)).unwrap().unwrap();
            let (rec, _) = live.submit(&asg.assignment, Choice::Left, now).unwrap();
            let (a, b, _) = live.names(&rec);
            let winner = if rec.r == 1.0 { a } else { b };
            assert!(asg.left.starts_with(&format!("{winner} on")), "{asg:?} {rec:?}");
        }
        assert!(live.next("ann", now, Duration::from_secs(60)).unwrap().is_none());
    }

    #[test]
    fn expired_tuples_return_to_the_pool() {
        let mut live = LiveSession::create("x".into(), spec(&["a", "b"], &["s1"])).unwrap();
        let t0 = Instant::now();
        let ttl = Duration::from_secs(600);
        let first = live.next("ann1", t0, ttl).unwrap().unwrap();
        assert!(live.next("ann2", t0, ttl).unwrap().is_none());
        let later = t0 + ttl;
        let again = live.next("ann2", later, ttl).unwrap().unwrap();
        assert_eq!(again.instruction, first.instruction);
        assert!(matches!(
            live.submit(&first.assignment, Choice::Tie, later),
            Err(ServiceError::Gone(_))
        ));
        live.submit(&again.assignment, Choice::Tie, later).unwrap();
        assert!(matches!(
            live.submit(&again.assignment, Choice::Tie, later),
            Err(ServiceError::AlreadySubmitted(_))
        ));
    }

    #[test]
    fn empty_leaderboard_is_flagged() {
        let live = LiveSession::create("x".into(), spec(&["a", "b", "c"], &["s1"])).unwrap();
        let board = leaderboard(live.session()).unwrap();
        assert!(board.insufficient_data);
        assert!(board.scores.iter().all(|s| s.score == 1.0));
        assert_eq!(board.beta.beta_acc, None);
        assert_eq!(board.beta.beta_sca, None);
    }

    #[test]
    fn full_traversal_is_uniform() {
        let mut live = LiveSession::create("x".into(), spec(&["a", "b", "c"], &["s1", "s2"])).unwrap();
        let now = Instant::now();
        while let Some(asg) = live.next("ann", now, Duration::from_secs(60)).unwrap() {
            live.submit(&asg.assignment, Choice::Left, now).unwrap();
        }
        let board = leaderboard(live.session()).unwrap();
        assert_eq!(board.budget_used, board.full_budget);
        assert!((board.beta.beta_acc.unwrap() - 1.0).abs() < 1e-12);
        let mean = board.scores.iter().map(|s| s.score).sum::<f64>() / 3.0;
        assert!((mean - 1.0).abs() < 1e-12);
    }
}
