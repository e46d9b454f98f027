//! Scenario runners and their results.

use std::borrow::Cow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{normalize, Normalization};
use crate::allocation::{Sampler, Strategy};
use crate::metrics::{beta_metrics, pearson, spearman, win_rate_error, MetricCurve, MetricKind};
use crate::session::{ModelId, PreferenceRecord, Registry, SampleId, Session, StepOutcome};

use super::config::{ScenarioConfig, ScenarioKind, StrategySpec};
use super::events::{Event, Plan, PlannedEvent};
use super::world::{ground_truth, win_matrix, GroundTruth, MappedJudge, Shared, World};
use super::ScenarioError;

/// Metric values at one budget point. Correlations that are undefined
/// (constant scores) are reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub delta: f64,
    pub r_s: f64,
    pub r_p: f64,
    pub beta_acc: f64,
    pub beta_con: f64,
    pub beta_sca: f64,
}

impl Metrics {
    pub fn get(&self, kind: MetricKind) -> f64 {
        match kind {
            MetricKind::Delta => self.delta,
            MetricKind::RS => self.r_s,
            MetricKind::RP => self.r_p,
            MetricKind::BetaAcc => self.beta_acc,
            MetricKind::BetaCon => self.beta_con,
            MetricKind::BetaSca => self.beta_sca,
        }
    }

    fn from_fn(mut f: impl FnMut(MetricKind) -> f64) -> Self {
        Metrics {
            delta: f(MetricKind::Delta),
            r_s: f(MetricKind::RS),
            r_p: f(MetricKind::RP),
            beta_acc: f(MetricKind::BetaAcc),
            beta_con: f(MetricKind::BetaCon),
            beta_sca: f(MetricKind::BetaSca),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub budget: u64,
    #[serde(flatten)]
    pub metrics: Metrics,
}

/// Allocation right after a model arrives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalStat {
    /// Judgments made before the arrival.
    pub budget: u64,
    pub model: String,
    /// Judgments observed in the window (shorter if the run ended first).
    pub window: u64,
    pub new_model_steps: u64,
    pub share: f64,
    /// Judgments until `r_p` returned to its last pre-arrival value, at
    /// evaluation-point resolution; `None` if it did not before the next
    /// arrival or the end.
    pub recovery_steps: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalScores {
    pub models: Vec<String>,
    /// Mean-one estimate from the final record set.
    pub estimate: Vec<f64>,
    pub ground_truth: Vec<f64>,
}

/// One strategy on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub points: Vec<EvalPoint>,
    /// The eligible tuples ran out before the budget.
    pub truncated: bool,
    pub final_scores: FinalScores,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub arrivals: Vec<ArrivalStat>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<PlannedEvent>,
    pub judge_failures: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<PreferenceRecord>>,
}

impl SeedRun {
    pub fn curve(&self, kind: MetricKind) -> MetricCurve {
        MetricCurve::new(
            kind,
            self.points.iter().map(|p| (p.budget, p.metrics.get(kind))).collect(),
            self.seed.to_string(),
        )
    }
}

/// Pointwise mean and standard error over the seeds that reached a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanPoint {
    pub budget: u64,
    pub seeds: usize,
    pub mean: Metrics,
    pub se: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRun {
    pub label: String,
    pub strategy: Strategy,
    pub sampler: Sampler,
    pub runs: Vec<SeedRun>,
    pub mean: Vec<MeanPoint>,
}

impl StrategyRun {
    /// Seed-mean curve of one metric.
    pub fn curve(&self, kind: MetricKind) -> MetricCurve {
        MetricCurve::new(
            kind,
            self.mean.iter().map(|p| (p.budget, p.mean.get(kind))).collect(),
            "mean",
        )
    }

    pub fn mean_at(&self, budget: u64) -> Option<&MeanPoint> {
        self.mean.iter().find(|p| p.budget == budget)
    }

    /// Mean share of the post-arrival window spent on the new model, per
    /// arrival budget.
    pub fn mean_arrival_share(&self) -> Vec<(u64, f64)> {
        let mut by_budget: std::collections::BTreeMap<u64, (f64, usize)> = Default::default();
        for run in &self.runs {
            for a in &run.arrivals {
                let e = by_budget.entry(a.budget).or_default();
                e.0 += a.share;
                e.1 += 1;
            }
        }
        by_budget.into_iter().map(|(b, (s, n))| (b, s / n as f64)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub strategies: Vec<StrategyRun>,
}

impl RunResult {
    pub fn get(&self, label: &str) -> Option<&StrategyRun> {
        self.strategies.iter().find(|s| s.label == label)
    }
}

/// Pointwise mean and standard error. Runs are ordered by seed first, so
/// the output does not depend on the order of `runs`.
pub fn average_over_seeds(runs: &[SeedRun]) -> Vec<MeanPoint> {
    let mut sorted: Vec<&SeedRun> = runs.iter().collect();
    sorted.sort_by_key(|r| r.seed);
    let len = sorted.iter().map(|r| r.points.len()).max().unwrap_or(0);
    (0..len)
        .map(|i| {
            let pts: Vec<&EvalPoint> = sorted.iter().filter_map(|r| r.points.get(i)).collect();
            let n = pts.len() as f64;
            let mean = Metrics::from_fn(|k| pts.iter().map(|p| p.metrics.get(k)).sum::<f64>() / n);
            let se = Metrics::from_fn(|k| {
                if pts.len() < 2 {
                    return 0.0;
                }
                let m = mean.get(k);
                let ss: f64 = pts.iter().map(|p| (p.metrics.get(k) - m).powi(2)).sum();
                (ss / (n - 1.0)).sqrt() / n.sqrt()
            });
            MeanPoint {
                budget: pts[0].budget,
                seeds: pts.len(),
                mean,
                se,
            }
        })
        .collect()
}

/// Judgments after `arrival` until `points` first returns to its last value
/// at or before `arrival`, looking only at points up to `until`.
pub fn recovery_steps(points: &[(u64, f64)], arrival: u64, until: u64) -> Option<u64> {
    let pre = points.iter().rev().find(|(b, _)| *b <= arrival)?.1;
    points
        .iter()
        .find(|(b, v)| *b > arrival && *b <= until && *v >= pre)
        .map(|(b, _)| b - arrival)
}

fn check_kind(cfg: &ScenarioConfig, want: &str) -> Result<(), ScenarioError> {
    let have = match cfg.scenario {
        ScenarioKind::Static => "static",
        ScenarioKind::Scalability { .. } => "scalability",
        ScenarioKind::Dynamic { .. } => "dynamic",
    };
    if have != want {
        return Err(ScenarioError::Config {
            field: "scenario.kind".into(),
            message: format!("expected {want}, got {have}"),
        });
    }
    Ok(())
}

pub fn run_static(cfg: &ScenarioConfig) -> Result<RunResult, ScenarioError> {
    check_kind(cfg, "static")?;
    run(cfg, 0)
}

pub fn run_scalability(cfg: &ScenarioConfig) -> Result<RunResult, ScenarioError> {
    check_kind(cfg, "scalability")?;
    run(cfg, 0)
}

pub fn run_dynamic(cfg: &ScenarioConfig) -> Result<RunResult, ScenarioError> {
    check_kind(cfg, "dynamic")?;
    run(cfg, 0)
}

/// Runs every strategy on every seed, seeds in parallel on `jobs` threads
/// (0: one per core).
pub fn run(cfg: &ScenarioConfig, jobs: usize) -> Result<RunResult, ScenarioError> {
    cfg.validate()?;
    let shared = Shared::load(cfg)?;
    let seeds = cfg.seeds.to_vec();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ScenarioError::Io(e.to_string()))?;
    let per_seed: Vec<Vec<SeedRun>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| run_seed(cfg, &shared, seed))
            .collect::<Result<_, _>>()
    })?;
    let mut strategies: Vec<StrategyRun> = cfg
        .strategies
        .iter()
        .map(|spec| StrategyRun {
            label: spec.label(),
            strategy: spec.strategy,
            sampler: spec.sampler(),
            runs: Vec::with_capacity(seeds.len()),
            mean: Vec::new(),
        })
        .collect();
    for runs in per_seed {
        for (s, run) in runs.into_iter().enumerate() {
            strategies[s].runs.push(run);
        }
    }
    for s in &mut strategies {
        s.mean = average_over_seeds(&s.runs);
    }
    Ok(RunResult { strategies })
}

fn run_seed(cfg: &ScenarioConfig, shared: &Shared, seed: u64) -> Result<Vec<SeedRun>, ScenarioError> {
    let plan = Plan::new(cfg, seed);
    let mut world = World::build(cfg, shared, seed, plan.pool_models, plan.pool_samples)?;
    cfg.strategies
        .iter()
        .map(|spec| run_one(cfg, spec, seed, &plan, &mut world))
        .collect()
}

struct Tracker {
    stat: ArrivalStat,
    model: ModelId,
    pre_rp: Option<f64>,
    open: bool,
}

/// Current estimate and ground truth over the active sets.
struct Evaluator<'a> {
    cfg: &'a ScenarioConfig,
    gt: GroundTruth,
}

impl Evaluator<'_> {
    fn active_records<'r>(session: &'r Session) -> Cow<'r, [PreferenceRecord]> {
        let all = session.records();
        if session.samples().active_count() == session.samples().len() {
            return Cow::Borrowed(all);
        }
        let active: Vec<bool> = (0..session.samples().len() as u32)
            .map(|k| session.samples().is_active(k))
            .collect();
        Cow::Owned(all.iter().filter(|r| active[r.sample.index()]).copied().collect())
    }

    fn refresh(&mut self, session: &Session, judge: &mut MappedJudge) -> Result<(), ScenarioError> {
        self.gt = ground_truth(
            judge,
            &session.active_models(),
            &session.active_samples(),
            &self.cfg.aggregator,
        )?;
        Ok(())
    }

    fn evaluate(&self, session: &Session) -> Result<Metrics, ScenarioError> {
        let models = session.active_models();
        let samples = session.active_samples();
        let records = Self::active_records(session);
        let est = self.cfg.aggregator.aggregate(&records, &models)?;
        let est_win = win_matrix(&self.cfg.aggregator, &est, &records, &models)?;
        let truth = &self.gt.scores.values;
        let beta = beta_metrics(session.ledger(), session.stats(), &models, &samples).ok();
        let beta = |f: fn(&crate::metrics::BetaReport) -> f64| beta.as_ref().map_or(0.0, f);
        Ok(Metrics {
            delta: win_rate_error(&est_win, &self.gt.win)?,
            r_s: spearman(&est.values, truth).unwrap_or(0.0),
            r_p: pearson(&est.values, truth).unwrap_or(0.0),
            beta_acc: beta(|b| b.beta_acc),
            beta_con: beta(|b| b.beta_con),
            beta_sca: beta(|b| b.beta_sca),
        })
    }
}

fn run_one(
    cfg: &ScenarioConfig,
    spec: &StrategySpec,
    seed: u64,
    plan: &Plan,
    world: &mut World,
) -> Result<SeedRun, ScenarioError> {
    let model_names = &world.model_names[..plan.initial_models];
    let sample_names = &world.sample_names[..plan.initial_samples];
    let mut session = Session::new(
        Registry::with_names(model_names.iter().cloned())?,
        Registry::with_names(sample_names.iter().cloned())?,
        cfg.session_config(spec),
        seed,
    );
    let mut map_m: Vec<u32> = (0..plan.initial_models as u32).collect();
    let mut map_s: Vec<u32> = (0..plan.initial_samples as u32).collect();
    let mut failures = 0u64;
    let window = match cfg.scenario {
        ScenarioKind::Scalability { window, .. } => window,
        _ => super::config::DEFAULT_WINDOW,
    };

    macro_rules! judge {
        () => {
            MappedJudge {
                world: &mut *world,
                models: &map_m,
                samples: &map_s,
                policy: cfg.on_judge_failure,
                failures: &mut failures,
            }
        };
    }

    let mut eval = Evaluator {
        cfg,
        gt: ground_truth(
            &mut judge!(),
            &session.active_models(),
            &session.active_samples(),
            &cfg.aggregator,
        )?,
    };
    let mut points = Vec::with_capacity(cfg.curve_len());
    let mut trackers: Vec<Tracker> = Vec::new();
    let mut truncated = false;

    for t in 0..cfg.budget {
        if let Some(events) = plan.schedule.get(&t) {
            let mut changed = false;
            for ev in events {
                match *ev {
                    Event::AddModel { pool } => {
                        let id = session.add_model(world.model_names[pool as usize].clone())?;
                        debug_assert_eq!(id.index(), map_m.len());
                        map_m.push(pool);
                        if let Some(prev) = trackers.last_mut() {
                            prev.open = false;
                        }
                        trackers.push(Tracker {
                            stat: ArrivalStat {
                                budget: t,
                                model: world.model_names[pool as usize].clone(),
                                window: 0,
                                new_model_steps: 0,
                                share: 0.0,
                                recovery_steps: None,
                            },
                            model: id,
                            pre_rp: points.last().map(|p: &EvalPoint| p.metrics.r_p),
                            open: true,
                        });
                        changed = true;
                    }
                    Event::AddSample { pool } => {
                        let id = session.add_sample(world.sample_names[pool as usize].clone())?;
                        debug_assert_eq!(id.index(), map_s.len());
                        map_s.push(pool);
                        changed = true;
                    }
                    Event::RemoveModel { pool } => {
                        let id = map_m.iter().position(|&p| p == pool).expect("planned removal of a known model");
                        session.remove_model(ModelId(id as u32))?;
                        changed = true;
                    }
                    Event::RemoveSample { pool } => {
                        let id = map_s.iter().position(|&p| p == pool).expect("planned removal of a known sample");
                        session.remove_sample(SampleId(id as u32))?;
                        changed = true;
                    }
                    Event::Skipped { .. } => {}
                }
            }
            if changed {
                eval.refresh(&session, &mut judge!())?;
            }
        }

        let outcome = session.step(&mut judge!()).map_err(ScenarioError::from_step)?;
        let rec = match outcome {
            StepOutcome::Recorded(rec) => rec,
            StepOutcome::Exhausted => {
                truncated = true;
                break;
            }
        };
        for tr in &mut trackers {
            if tr.stat.window < window && t < tr.stat.budget + window {
                tr.stat.window += 1;
                if rec.a == tr.model || rec.b == tr.model {
                    tr.stat.new_model_steps += 1;
                }
            }
        }

        let used = t + 1;
        if used % cfg.eval_every == 0 || used == cfg.budget {
            let metrics = eval.evaluate(&session)?;
            for tr in trackers.iter_mut().filter(|tr| tr.open) {
                if let Some(pre) = tr.pre_rp {
                    if tr.stat.recovery_steps.is_none() && metrics.r_p >= pre {
                        tr.stat.recovery_steps = Some(used - tr.stat.budget);
                        tr.open = false;
                    }
                }
            }
            points.push(EvalPoint { budget: used, metrics });
        }
    }
    let models = session.active_models();
    let records = Evaluator::active_records(&session);
    let est = cfg.aggregator.aggregate(&records, &models)?;
    let est = normalize(&est, Normalization::MeanOne).unwrap_or(est);
    let final_scores = FinalScores {
        models: models
            .iter()
            .map(|m| session.models().name(m.0).unwrap_or_default().to_string())
            .collect(),
        estimate: est.values,
        ground_truth: eval.gt.scores.values.clone(),
    };
    let arrivals = trackers
        .into_iter()
        .map(|mut tr| {
            tr.stat.share = if tr.stat.window > 0 {
                tr.stat.new_model_steps as f64 / tr.stat.window as f64
            } else {
                0.0
            };
            tr.stat
        })
        .collect();
    Ok(SeedRun {
        seed,
        points,
        truncated,
        final_scores,
        arrivals,
        events: plan.events(),
        judge_failures: failures,
        records: cfg.keep_records.then(|| session.records().to_vec()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aggregation::Aggregator;
    use crate::allocation::ObjectiveWeights;
    use crate::scenarios::config::{EventProbabilities, Seeds};

    fn all_strategies() -> Vec<StrategySpec> {
        vec![
            StrategySpec::new(Strategy::UniCbe(ObjectiveWeights::default())),
            StrategySpec::new(Strategy::Random),
            StrategySpec::new(Strategy::Arena),
            StrategySpec::new(Strategy::AlpacaEval { reference: None }),
        ]
    }

    #[test]
    fn exhaustion_reaches_ground_truth() {
        for aggregator in [Aggregator::bt(), Aggregator::Avg] {
            let cfg = ScenarioConfig {
                aggregator,
                eval_every: 50,
                ..ScenarioConfig::synthetic(4, 5, 30, all_strategies(), Seeds::List(vec![3, 4]))
            };
            let res = run(&cfg, 1).unwrap();
            for s in &res.strategies {
                let last = s.mean.last().unwrap();
                assert_eq!(last.budget, 30);
                assert!(last.mean.delta < 1e-9, "{} {:?}", s.label, last.mean);
                assert!(last.mean.r_p > 1.0 - 1e-9, "{} {:?}", s.label, last.mean);
                assert!((last.mean.beta_acc - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn curves_have_the_stated_length_and_are_deterministic() {
        let cfg = ScenarioConfig {
            eval_every: 7,
            ..ScenarioConfig::synthetic(5, 6, 40, all_strategies(), Seeds::Range { start: 0, count: 3 })
        };
        let a = run(&cfg, 2).unwrap();
        let b = run(&cfg, 1).unwrap();
        assert_eq!(a, b);
        for s in &a.strategies {
            assert_eq!(s.mean.len(), cfg.curve_len());
            assert_eq!(s.mean.len(), 6);
            assert_eq!(s.mean.last().unwrap().budget, 40);
            assert!(s.runs.iter().all(|r| r.points.len() == 6 && !r.truncated));
        }
    }

    #[test]
    fn degenerate_schedules_equal_static() {
        let base = ScenarioConfig::synthetic(5, 6, 60, all_strategies(), Seeds::List(vec![9]));
        let stat = run(&base, 1).unwrap();
        let scal = run(
            &ScenarioConfig {
                scenario: ScenarioKind::Scalability {
                    initial_models: 5,
                    arrival_every: 10,
                    window: 100,
                },
                ..base.clone()
            },
            1,
        )
        .unwrap();
        let dyn_ = run(
            &ScenarioConfig {
                scenario: ScenarioKind::Dynamic {
                    events: EventProbabilities::zero(),
                },
                ..base
            },
            1,
        )
        .unwrap();
        for ((a, b), c) in stat.strategies.iter().zip(&scal.strategies).zip(&dyn_.strategies) {
            assert_eq!(a.mean, b.mean);
            assert_eq!(a.mean, c.mean);
        }
    }

    #[test]
    fn alpacaeval_spends_everything_on_the_newcomer() {
        let cfg = ScenarioConfig {
            scenario: ScenarioKind::Scalability {
                initial_models: 3,
                arrival_every: 30,
                window: 10,
            },
            ..ScenarioConfig::synthetic(
                4,
                10,
                60,
                vec![StrategySpec::new(Strategy::AlpacaEval { reference: None })],
                Seeds::List(vec![1]),
            )
        };
        let res = run(&cfg, 1).unwrap();
        let arrival = &res.strategies[0].runs[0].arrivals[0];
        // Before the arrival the two other models met the reference 15 times each.
        assert_eq!(arrival.budget, 30);
        assert_eq!(arrival.window, 10);
        assert_eq!(arrival.share, 1.0);
    }

    #[test]
    fn dynamic_runs_stay_consistent() {
        let cfg = ScenarioConfig {
            scenario: ScenarioKind::Dynamic {
                events: EventProbabilities {
                    add_model: 0.05,
                    remove_model: 0.05,
                    add_sample: 0.05,
                    remove_sample: 0.05,
                },
            },
            keep_records: true,
            ..ScenarioConfig::synthetic(5, 8, 150, all_strategies(), Seeds::List(vec![2, 5]))
        };
        let res = run(&cfg, 1).unwrap();
        for s in &res.strategies {
            for r in &s.runs {
                assert!(!r.events.is_empty());
                let recs = r.records.as_ref().unwrap();
                let last = r.points.last().unwrap().budget;
                if r.truncated {
                    assert!(recs.len() as u64 >= last && (recs.len() as u64) < cfg.budget);
                } else {
                    assert_eq!(recs.len() as u64, last);
                }
                let models = r.final_scores.models.len();
                assert_eq!(r.final_scores.estimate.len(), models);
                assert_eq!(r.final_scores.ground_truth.len(), models);
                for p in &r.points {
                    assert!((0.0..=1.0).contains(&p.metrics.delta));
                    assert!((-1.0..=1.0).contains(&p.metrics.r_p));
                }
            }
        }
    }

    fn seed_run(seed: u64, values: &[f64]) -> SeedRun {
        SeedRun {
            seed,
            points: values
                .iter()
                .enumerate()
                .map(|(i, &v)| EvalPoint {
                    budget: (i as u64 + 1) * 10,
                    metrics: Metrics {
                        delta: v,
                        r_p: 1.0 - v,
                        ..Default::default()
                    },
                })
                .collect(),
            truncated: false,
            final_scores: FinalScores {
                models: vec![],
                estimate: vec![],
                ground_truth: vec![],
            },
            arrivals: vec![],
            events: vec![],
            judge_failures: 0,
            records: None,
        }
    }

    #[test]
    fn averaging_examples() {
        let one = average_over_seeds(&[seed_run(1, &[0.3, 0.2])]);
        assert_eq!(one[1].mean.delta, 0.2);
        assert_eq!(one[1].se.delta, 0.0);

        let twins = average_over_seeds(&[seed_run(1, &[0.3, 0.2]), seed_run(2, &[0.3, 0.2])]);
        assert_eq!(twins[0].mean.delta, 0.3);
        assert_eq!(twins[0].se.delta, 0.0);

        let runs = [seed_run(1, &[0.1, 0.7]), seed_run(2, &[0.3, 0.2]), seed_run(3, &[0.6])];
        let fwd = average_over_seeds(&runs);
        let rev = average_over_seeds(&[runs[2].clone(), runs[0].clone(), runs[1].clone()]);
        assert_eq!(fwd, rev);
        assert_eq!((fwd[0].seeds, fwd[1].seeds), (3, 2));
        // Sample standard deviation of (0.7, 0.2) is 0.3536; divided by √2.
        assert!((fwd[1].se.delta - 0.25).abs() < 1e-12);
    }

    #[test]
    fn recovery_examples() {
        let pts = [(10, 0.9), (20, 0.95), (30, 0.6), (40, 0.8), (50, 0.96)];
        assert_eq!(recovery_steps(&pts, 20, 100), Some(30));
        assert_eq!(recovery_steps(&pts, 20, 40), None);
        assert_eq!(recovery_steps(&pts, 5, 100), None);
    }
}
