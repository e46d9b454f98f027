//! Experiment runners: static evaluation, model arrivals, dynamic rosters,
//! seed averaging, ground truth and the uniform-allocation optimality check.
//!
//! Every seed gets its own pool of models and samples (a synthetic tensor or
//! a random draw from recorded data). All strategies of a seed run on that
//! pool with the same session seed and the same roster changes, so their
//! curves differ only through allocation.

mod config;
mod events;
mod optimality;
mod run;
mod world;

use thiserror::Error;

use crate::aggregation::AggregationError;
use crate::allocation::{AllocError, Tuple};
use crate::judges::{IngestError, JudgeError};
use crate::metrics::MetricError;
use crate::session::{SessionError, StepError};

pub use config::{
    EventProbabilities, FailurePolicy, JudgeSpec, ScenarioConfig, ScenarioKind, Seeds, StrategySpec,
    DEFAULT_EVAL_EVERY, DEFAULT_WINDOW,
};
pub use events::{draw_event_kinds, Event, EventKind, Plan, PlannedEvent};
pub use optimality::{expected_square, is_balanced, verify_uniform_optimality, OptimalityReport};
pub use run::{
    average_over_seeds, recovery_steps, run, run_dynamic, run_scalability, run_static, ArrivalStat, EvalPoint,
    FinalScores, MeanPoint, Metrics, RunResult, SeedRun, StrategyRun,
};
pub use world::{ground_truth, win_matrix, GroundTruth, ResponseSet};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid config at {field}: {message}")]
    Config { field: String, message: String },
    #[error("judge failure: {0}")]
    Judge(#[from] JudgeError),
    #[error("ground truth needs every tuple; {} missing, first {:?}", .0.len(), .0.first())]
    Holes(Vec<Tuple>),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{0}")]
    Pool(String),
    #[error("{0}")]
    Io(String),
}

impl ScenarioError {
    pub(crate) fn from_step(e: StepError) -> Self {
        match e {
            StepError::Alloc(e) => e.into(),
            StepError::Judge(e) => e.into(),
            StepError::Session(e) => e.into(),
        }
    }

    /// True for failures of the judge itself (timeouts, bad output).
    pub fn is_judge_failure(&self) -> bool {
        matches!(self, ScenarioError::Judge(e) if e.is_judge_failure())
    }
}
