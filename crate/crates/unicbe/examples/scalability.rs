//! Models join a running evaluation one at a time. Prints how much of the
//! budget right after each arrival goes to the newcomer and how quickly the
//! ranking quality recovers.

use unicbe::allocation::Strategy;
use unicbe::scenarios::{run, ScenarioConfig, ScenarioKind, Seeds, StrategySpec};
use unicbe::ObjectiveWeights;

fn main() -> anyhow::Result<()> {
    let seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(8);
    let cfg = ScenarioConfig {
        scenario: ScenarioKind::Scalability {
            initial_models: 6,
            arrival_every: 300,
            window: 100,
        },
        ..ScenarioConfig::synthetic(
            10,
            200,
            1500,
            vec![
                StrategySpec::new(Strategy::UniCbe(ObjectiveWeights::default())),
                StrategySpec::new(Strategy::Random),
            ],
            Seeds::Range { start: 0, count: seeds },
        )
    };
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let result = run(&cfg, jobs)?;

    for s in &result.strategies {
        println!("{}", s.label);
        for (budget, share) in s.mean_arrival_share() {
            let recovered: Vec<u64> = s
                .runs
                .iter()
                .filter_map(|r| r.arrivals.iter().find(|a| a.budget == budget)?.recovery_steps)
                .collect();
            let mean = if recovered.is_empty() {
                "never".to_string()
            } else {
                format!("{:.0}", recovered.iter().sum::<u64>() as f64 / recovered.len() as f64)
            };
            println!(
                "  arrival at T = {budget:>4}: newcomer share {share:.3}, r_p recovered in {mean} judgments ({}/{} seeds)",
                recovered.len(),
                s.runs.len()
            );
        }
    }
    Ok(())
}
