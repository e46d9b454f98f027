//! Roster changes of the scalability and dynamic scenarios, planned up front
//! so every strategy of a seed sees the same sequence.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::config::{EventProbabilities, ScenarioConfig, ScenarioKind};
use super::world::{derive_seed, EVENT_TAG};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    AddModel,
    RemoveModel,
    AddSample,
    RemoveSample,
}

impl EventKind {
    pub const ALL: [EventKind; 4] = [
        EventKind::AddModel,
        EventKind::RemoveModel,
        EventKind::AddSample,
        EventKind::RemoveSample,
    ];
}

/// A roster change; ids are pool indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    AddModel { pool: u32 },
    RemoveModel { pool: u32 },
    AddSample { pool: u32 },
    RemoveSample { pool: u32 },
    /// A removal that would have left fewer than two models or no samples.
    Skipped { kind: EventKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedEvent {
    /// Applied before the judgment with this zero-based index.
    pub step: u64,
    #[serde(flatten)]
    pub event: Event,
}

/// Draws one event (or none) per step.
pub fn draw_event_kinds<R: Rng + ?Sized>(p: &EventProbabilities, steps: u64, rng: &mut R) -> Vec<Option<EventKind>> {
    let probs = p.as_array();
    (0..steps)
        .map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (kind, q) in EventKind::ALL.iter().zip(probs) {
                acc += q;
                if u < acc {
                    return Some(*kind);
                }
            }
            None
        })
        .collect()
}

/// Initial and total pool sizes plus the change schedule of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub initial_models: usize,
    pub initial_samples: usize,
    pub pool_models: usize,
    pub pool_samples: usize,
    pub schedule: BTreeMap<u64, Vec<Event>>,
}

impl Plan {
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Self {
        let (m, n) = (cfg.models, cfg.samples);
        match cfg.scenario {
            ScenarioKind::Static => Plan {
                initial_models: m,
                initial_samples: n,
                pool_models: m,
                pool_samples: n,
                schedule: BTreeMap::new(),
            },
            ScenarioKind::Scalability {
                initial_models,
                arrival_every,
                ..
            } => {
                let mut schedule = BTreeMap::new();
                for (j, pool) in (initial_models..m).enumerate() {
                    let step = arrival_every * (j as u64 + 1);
                    if step >= cfg.budget {
                        break;
                    }
                    schedule.insert(step, vec![Event::AddModel { pool: pool as u32 }]);
                }
                Plan {
                    initial_models,
                    initial_samples: n,
                    pool_models: m,
                    pool_samples: n,
                    schedule,
                }
            }
            ScenarioKind::Dynamic { events } => {
                let mut rng = StdRng::seed_from_u64(derive_seed(seed, EVENT_TAG));
                let kinds = draw_event_kinds(&events, cfg.budget, &mut rng);
                let mut models: Vec<u32> = (0..m as u32).collect();
                let mut samples: Vec<u32> = (0..n as u32).collect();
                let (mut pool_m, mut pool_s) = (m as u32, n as u32);
                let mut schedule = BTreeMap::new();
                for (step, kind) in kinds.into_iter().enumerate() {
                    let Some(kind) = kind else { continue };
                    let event = match kind {
                        EventKind::AddModel => {
                            models.push(pool_m);
                            pool_m += 1;
                            Event::AddModel { pool: pool_m - 1 }
                        }
                        EventKind::AddSample => {
                            samples.push(pool_s);
                            pool_s += 1;
                            Event::AddSample { pool: pool_s - 1 }
                        }
                        EventKind::RemoveModel if models.len() > 2 => {
                            let pool = models.remove(rng.random_range(0..models.len()));
                            Event::RemoveModel { pool }
                        }
                        EventKind::RemoveSample if samples.len() > 1 => {
                            let pool = samples.remove(rng.random_range(0..samples.len()));
                            Event::RemoveSample { pool }
                        }
                        kind => Event::Skipped { kind },
                    };
                    schedule.insert(step as u64, vec![event]);
                }
                Plan {
                    initial_models: m,
                    initial_samples: n,
                    pool_models: pool_m as usize,
                    pool_samples: pool_s as usize,
                    schedule,
                }
            }
        }
    }

    pub fn events(&self) -> Vec<PlannedEvent> {
        self.schedule
            .iter()
            .flat_map(|(&step, evs)| evs.iter().map(move |&event| PlannedEvent { step, event }))
            .collect()
    }
}
