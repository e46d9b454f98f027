//! Uniformity-driven budget allocation for comparing-based evaluation of
//! language models.
//!
//! A [`Session`] holds the models, samples and every preference judged so
//! far. Each step an allocation [`Strategy`] turns that state into sampling
//! weights over `(model pair, sample)` tuples, a [`Sampler`] picks one, a
//! [`judges::Judge`] supplies the preference, and the result is recorded.
//! Scores come from an [`Aggregator`] (average win rate, Elo or
//! Bradley–Terry).

pub mod aggregation;
pub mod allocation;
pub mod cli;
pub mod judges;
pub mod metrics;
pub mod scenarios;
pub mod session;

pub use aggregation::{Aggregator, ModelScores};
pub use allocation::{ObjectiveWeights, Sampler, Strategy, Tuple};
pub use session::{ModelId, PreferenceRecord, SampleId, Session, SessionConfig};
