//! Ingests a JSONL log of recorded preferences and lets UniCBE choose which of
//! them to reveal, stopping well short of the whole log.

use std::path::Path;
use std::sync::Arc;

use unicbe::aggregation::{normalize, Normalization};
use unicbe::judges::{ReplayDataset, ReplayJudge};
use unicbe::session::StepOutcome;
use unicbe::{Aggregator, SessionConfig};

fn main() -> anyhow::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data/arena_log.jsonl");
    let data = Arc::new(ReplayDataset::from_path(&path)?);
    let summary = data.summary();
    println!(
        "{}: {} models, {} samples, {} records, coverage {:.2}",
        path.file_name().unwrap_or_default().to_string_lossy(),
        summary.models,
        summary.samples,
        summary.records,
        summary.coverage
    );

    let config = SessionConfig {
        aggregator: Aggregator::bt(),
        ..SessionConfig::default()
    };
    let mut session = data.session(config, 1);
    let mut judge = ReplayJudge::new(data.clone());
    let budget = data.len() as u64 / 2;
    while session.budget_used() < budget {
        if let StepOutcome::Exhausted = session.step(&mut judge)? {
            break;
        }
    }

    let models = session.active_models();
    let partial = normalize(&session.config().aggregator.aggregate(session.records(), &models)?, Normalization::MeanOne)?;
    let mut everything = data.session(SessionConfig::default(), 1);
    let mut all = ReplayJudge::new(data.clone());
    while let StepOutcome::Recorded(_) = everything.step(&mut all)? {}
    let full = normalize(&Aggregator::bt().aggregate(everything.records(), &models)?, Normalization::MeanOne)?;

    println!("{:<12}{:>10}{:>10}", "model", format!("T={budget}"), format!("T={}", everything.budget_used()));
    for (i, &id) in models.iter().enumerate() {
        println!(
            "{:<12}{:>10.3}{:>10.3}",
            session.models().name(id.0).unwrap_or("?"),
            partial.values[i],
            full.values[i]
        );
    }
    Ok(())
}
