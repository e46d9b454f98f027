//! Models and samples come and go while the evaluation runs. Prints the event
//! log of one seed and the error curve of each strategy.

use unicbe::allocation::Strategy;
use unicbe::scenarios::{run, EventProbabilities, ScenarioConfig, ScenarioKind, Seeds, StrategySpec};
use unicbe::ObjectiveWeights;

fn main() -> anyhow::Result<()> {
    let cfg = ScenarioConfig {
        scenario: ScenarioKind::Dynamic {
            events: EventProbabilities {
                add_model: 0.005,
                remove_model: 0.002,
                add_sample: 0.02,
                remove_sample: 0.01,
            },
        },
        ..ScenarioConfig::synthetic(
            10,
            100,
            1500,
            vec![
                StrategySpec::new(Strategy::UniCbe(ObjectiveWeights::default())),
                StrategySpec::new(Strategy::Random),
            ],
            Seeds::Range { start: 0, count: 4 },
        )
    };
    let result = run(&cfg, 1)?;

    let first = &result.strategies[0].runs[0];
    println!("seed {} events:", first.seed);
    for e in first.events.iter().take(12) {
        println!("  {e:?}");
    }
    if first.events.len() > 12 {
        println!("  ... {} more", first.events.len() - 12);
    }

    for s in &result.strategies {
        let curve: Vec<String> = s
            .mean
            .iter()
            .filter(|p| p.budget % 300 == 0)
            .map(|p| format!("{}:{:.4}", p.budget, p.mean.delta))
            .collect();
        println!("{:<8} delta {}", s.label, curve.join(" "));
    }
    Ok(())
}
