//! The allocate → judge → record loop by hand: ten synthetic models, a
//! simulated judge, and Bradley-Terry scores printed as the budget grows.

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::SeedableRng;
use unicbe::aggregation::{normalize, Normalization};
use unicbe::judges::{synth_ground_truth, BiasParams, JudgeMode, SyntheticJudge};
use unicbe::session::StepOutcome;
use unicbe::{Aggregator, Session, SessionConfig};

fn main() -> anyhow::Result<()> {
    let (m, n) = (10, 200);
    let gt = Arc::new(synth_ground_truth(m, n, BiasParams::default(), &mut StdRng::seed_from_u64(7))?);
    let mut judge = SyntheticJudge::new(gt.clone(), JudgeMode::Bernoulli { tie_prob: 0.0 }, 7);

    let config = SessionConfig {
        aggregator: Aggregator::bt(),
        ..SessionConfig::default()
    };
    let mut session = Session::with_sizes(m, n, config, 7);
    println!("{m} models, {n} samples, full traversal {} judgments", session.full_budget());

    for checkpoint in [100, 500, 1000, 2000] {
        while session.budget_used() < checkpoint {
            if let StepOutcome::Exhausted = session.step(&mut judge)? {
                break;
            }
        }
        let models = session.active_models();
        let scores = session.config().aggregator.aggregate(session.records(), &models)?;
        let scores = normalize(&scores, Normalization::MeanOne)?;
        let top: Vec<String> = scores
            .ranking()
            .iter()
            .take(3)
            .map(|&id| format!("{} {:.3}", session.models().name(id.0).unwrap_or("?"), scores.get(id).unwrap_or(f64::NAN)))
            .collect();
        println!("T = {checkpoint:>4}: top three {}", top.join(", "));
    }

    let truth: Vec<(usize, f64)> = {
        let mut v: Vec<(usize, f64)> = gt.true_scores().iter().copied().enumerate().collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1));
        v
    };
    println!(
        "true order starts with m{}, m{}, m{}",
        truth[0].0, truth[1].0, truth[2].0
    );
    Ok(())
}
