//! Experiment configuration, read from a single JSON document.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::aggregation::Aggregator;
use crate::allocation::{Sampler, Strategy};
use crate::judges::{BiasParams, JudgeMode};
use crate::session::{pair_count, SessionConfig, StatsPrior};

use super::ScenarioError;

pub const DEFAULT_EVAL_EVERY: u64 = 25;
pub const DEFAULT_WINDOW: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Models per run (for scalability: the final pool size).
    pub models: usize,
    pub samples: usize,
    /// Judgments per run.
    pub budget: u64,
    pub strategies: Vec<StrategySpec>,
    #[serde(default)]
    pub aggregator: Aggregator,
    #[serde(default)]
    pub prior: StatsPrior,
    #[serde(default)]
    pub judge: JudgeSpec,
    pub seeds: Seeds,
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    #[serde(default)]
    pub scenario: ScenarioKind,
    #[serde(default)]
    pub on_judge_failure: FailurePolicy,
    /// Keep every run's record log in the result.
    #[serde(default)]
    pub keep_records: bool,
}

fn default_eval_every() -> u64 {
    DEFAULT_EVAL_EVERY
}

/// One strategy to compare, with an optional display label and sampler
/// override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<Sampler>,
}

impl StrategySpec {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            label: None,
            strategy,
            sampler: None,
        }
    }

    pub fn with_sampler(mut self, sampler: Sampler) -> Self {
        self.sampler = Some(sampler);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.strategy.label().to_string())
    }

    pub fn sampler(&self) -> Sampler {
        self.sampler.unwrap_or_else(|| self.strategy.default_sampler())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JudgeSpec {
    /// A fresh synthetic tensor per seed.
    Synthetic {
        #[serde(default)]
        bias: BiasParams,
        #[serde(default = "default_mode")]
        mode: JudgeMode,
    },
    /// A recorded preference log; each seed draws its models and samples
    /// from the log's.
    Replay { path: PathBuf },
    /// A judging command; `responses` holds the instructions and each
    /// model's outputs.
    External {
        command: String,
        #[serde(default)]
        args: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_secs: f64,
        #[serde(default = "default_parallel")]
        max_parallel: usize,
        responses: PathBuf,
    },
}

fn default_mode() -> JudgeMode {
    JudgeMode::Bernoulli { tie_prob: 0.0 }
}
fn default_timeout() -> f64 {
    crate::judges::DEFAULT_TIMEOUT.as_secs_f64()
}
fn default_parallel() -> usize {
    1
}

impl Default for JudgeSpec {
    fn default() -> Self {
        JudgeSpec::Synthetic {
            bias: BiasParams::default(),
            mode: default_mode(),
        }
    }
}

/// Either an explicit list or `count` consecutive seeds from `start`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Range {
        #[serde(default)]
        start: u64,
        count: u64,
    },
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Range { start, count } => (*start..start + count).collect(),
        }
    }

    /// Replaces the first seed.
    pub fn with_head(&self, head: u64) -> Seeds {
        let mut v = self.to_vec();
        match v.first_mut() {
            Some(first) => *first = head,
            None => v.push(head),
        }
        Seeds::List(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioKind {
    #[default]
    Static,
    /// Starts with `initial_models` and adds one model every
    /// `arrival_every` judgments until `models` are active.
    Scalability {
        initial_models: usize,
        arrival_every: u64,
        #[serde(default = "default_window")]
        window: u64,
    },
    /// Before every judgment one event is drawn with these probabilities.
    Dynamic {
        #[serde(default)]
        events: EventProbabilities,
    },
}

fn default_window() -> u64 {
    DEFAULT_WINDOW
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EventProbabilities {
    pub add_model: f64,
    pub remove_model: f64,
    pub add_sample: f64,
    pub remove_sample: f64,
}

impl Default for EventProbabilities {
    fn default() -> Self {
        Self {
            add_model: 0.01,
            remove_model: 0.01,
            add_sample: 0.01,
            remove_sample: 0.01,
        }
    }
}

impl EventProbabilities {
    pub fn zero() -> Self {
        Self {
            add_model: 0.0,
            remove_model: 0.0,
            add_sample: 0.0,
            remove_sample: 0.0,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.add_model, self.remove_model, self.add_sample, self.remove_sample]
    }

    pub fn nothing(&self) -> f64 {
        1.0 - self.as_array().iter().sum::<f64>()
    }
}

/// What a run does when the judge fails on a tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailurePolicy {
    #[default]
    Abort,
    /// Masks the tuple and allocates again.
    Skip,
}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ScenarioConfig {
    /// A static synthetic experiment with default judge and aggregator.
    pub fn synthetic(models: usize, samples: usize, budget: u64, strategies: Vec<StrategySpec>, seeds: Seeds) -> Self {
        Self {
            models,
            samples,
            budget,
            strategies,
            aggregator: Aggregator::default(),
            prior: StatsPrior::default(),
            judge: JudgeSpec::default(),
            seeds,
            eval_every: DEFAULT_EVAL_EVERY,
            scenario: ScenarioKind::Static,
            on_judge_failure: FailurePolicy::Abort,
            keep_records: false,
        }
    }

    /// `N · M (M − 1) / 2` for the configured sizes.
    pub fn full_budget(&self) -> u64 {
        (self.samples * pair_count(self.models)) as u64
    }

    /// Number of evaluation points of an untruncated curve.
    pub fn curve_len(&self) -> usize {
        self.budget.div_ceil(self.eval_every.max(1)) as usize
    }

    pub fn session_config(&self, spec: &StrategySpec) -> SessionConfig {
        SessionConfig {
            strategy: spec.strategy,
            sampler: spec.sampler(),
            aggregator: self.aggregator,
            prior: self.prior,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.models < 2 {
            return Err(invalid("models", "need at least 2 models"));
        }
        if self.samples < 1 {
            return Err(invalid("samples", "need at least 1 sample"));
        }
        if self.budget < 1 {
            return Err(invalid("budget", "must be at least 1"));
        }
        if self.eval_every < 1 {
            return Err(invalid("eval_every", "must be at least 1"));
        }
        if self.seeds.to_vec().is_empty() {
            return Err(invalid("seeds", "no seeds given"));
        }
        if self.strategies.is_empty() {
            return Err(invalid("strategies", "no strategies given"));
        }
        let mut labels = std::collections::HashSet::new();
        for (i, spec) in self.strategies.iter().enumerate() {
            if !labels.insert(spec.label()) {
                return Err(invalid(
                    &format!("strategies[{i}].label"),
                    format!("duplicate label {:?}", spec.label()),
                ));
            }
            if let Strategy::UniCbe(w) = spec.strategy {
                w.validate()
                    .map_err(|e| invalid(&format!("strategies[{i}].strategy"), e.to_string()))?;
            }
            if let Some(Sampler::Temperature(t)) = spec.sampler {
                if t.is_nan() || t < 0.0 {
                    return Err(invalid(
                        &format!("strategies[{i}].sampler.temperature"),
                        "must be nonnegative",
                    ));
                }
            }
        }
        if let Aggregator::Bt { l2, tol, max_iters } = self.aggregator {
            if !(l2 >= 0.0 && l2.is_finite()) || !(tol > 0.0) || max_iters == 0 {
                return Err(invalid("aggregator", "l2 must be >= 0, tol > 0 and max_iters > 0"));
            }
        }
        if let JudgeSpec::External {
            timeout_secs,
            max_parallel,
            ..
        } = &self.judge
        {
            if !(*timeout_secs > 0.0 && timeout_secs.is_finite()) {
                return Err(invalid("judge.timeout_secs", "must be positive"));
            }
            if *max_parallel < 1 {
                return Err(invalid("judge.max_parallel", "must be at least 1"));
            }
        }
        match self.scenario {
            ScenarioKind::Static => {
                if self.budget > self.full_budget() {
                    return Err(invalid(
                        "budget",
                        format!("{} exceeds the full traversal of {} tuples", self.budget, self.full_budget()),
                    ));
                }
            }
            ScenarioKind::Scalability {
                initial_models,
                arrival_every,
                window,
            } => {
                if !(2..=self.models).contains(&initial_models) {
                    return Err(invalid(
                        "scenario.initial_models",
                        format!("must lie in 2..={}", self.models),
                    ));
                }
                if arrival_every < 1 {
                    return Err(invalid("scenario.arrival_every", "must be at least 1"));
                }
                if window < 1 {
                    return Err(invalid("scenario.window", "must be at least 1"));
                }
            }
            ScenarioKind::Dynamic { events } => {
                let p = events.as_array();
                if p.iter().any(|x| !(0.0..=1.0).contains(x)) || events.nothing() < -1e-12 {
                    return Err(invalid(
                        "scenario.events",
                        "probabilities must lie in [0, 1] and sum to at most 1",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_uses_defaults() {
        let cfg: ScenarioConfig = serde_json::from_str(
            r#"{"models": 4, "samples": 3, "budget": 10,
                "strategies": [{"strategy": {"name": "unicbe"}}, {"strategy": {"name": "random"}}],
                "judge": {"kind": "synthetic"}, "seeds": [1, 2]}"#,
        )
        .unwrap();
        assert_eq!(cfg.eval_every, 25);
        assert_eq!(cfg.scenario, ScenarioKind::Static);
        assert_eq!(cfg.strategies[0].sampler(), Sampler::Greedy);
        assert_eq!(cfg.strategies[1].sampler(), Sampler::Probabilistic);
        assert_eq!(cfg.strategies[1].label(), "random");
        assert_eq!(cfg.curve_len(), 1);
        cfg.validate().unwrap();
    }

    #[test]
    fn seeds_forms() {
        let s: Seeds = serde_json::from_str(r#"{"start": 5, "count": 3}"#).unwrap();
        assert_eq!(s.to_vec(), vec![5, 6, 7]);
        assert_eq!(s.with_head(9).to_vec(), vec![9, 6, 7]);
        let s: Seeds = serde_json::from_str("[4]").unwrap();
        assert_eq!(s.to_vec(), vec![4]);
    }

    #[test]
    fn validation_names_the_field() {
        let base = ScenarioConfig::synthetic(4, 3, 18, vec![StrategySpec::new(Strategy::Random)], Seeds::List(vec![0]));
        base.validate().unwrap();
        let field = |cfg: ScenarioConfig| match cfg.validate() {
            Err(ScenarioError::Config { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        assert_eq!(field(ScenarioConfig { budget: 19, ..base.clone() }), "budget");
        assert_eq!(field(ScenarioConfig { eval_every: 0, ..base.clone() }), "eval_every");
        let dup = ScenarioConfig {
            strategies: vec![StrategySpec::new(Strategy::Random); 2],
            ..base.clone()
        };
        assert_eq!(field(dup), "strategies[1].label");
        let bad_events = ScenarioConfig {
            scenario: ScenarioKind::Dynamic {
                events: EventProbabilities {
                    add_model: 0.6,
                    remove_model: 0.6,
                    ..EventProbabilities::zero()
                },
            },
            ..base.clone()
        };
        assert_eq!(field(bad_events), "scenario.events");
        let scal = ScenarioConfig {
            scenario: ScenarioKind::Scalability {
                initial_models: 5,
                arrival_every: 10,
                window: 100,
            },
            ..base
        };
        assert_eq!(field(scal), "scenario.initial_models");
    }

    #[test]
    fn unknown_strategy_is_rejected() {
        let err = serde_json::from_str::<StrategySpec>(r#"{"strategy": {"name": "best"}}"#);
        assert!(err.is_err());
    }
}
