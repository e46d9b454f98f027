//! Four strategies on the same synthetic worlds: win-rate error curves and the
//! budget each needs to reach a target error.

use unicbe::allocation::Strategy;
use unicbe::metrics::{budget_savings, MetricKind};
use unicbe::scenarios::{run, ScenarioConfig, Seeds, StrategySpec};
use unicbe::ObjectiveWeights;

fn main() -> anyhow::Result<()> {
    let seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(8);
    let cfg = ScenarioConfig::synthetic(
        10,
        200,
        3000,
        vec![
            StrategySpec::new(Strategy::UniCbe(ObjectiveWeights::default())),
            StrategySpec::new(Strategy::Random),
            StrategySpec::new(Strategy::Arena),
            StrategySpec::new(Strategy::AlpacaEval { reference: None }),
        ],
        Seeds::Range { start: 0, count: seeds },
    );
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let result = run(&cfg, jobs)?;

    let checkpoints = [250, 500, 1000, 2000, 3000];
    print!("{:<12}", "delta at T");
    for t in checkpoints {
        print!("{t:>9}");
    }
    println!();
    for s in &result.strategies {
        print!("{:<12}", s.label);
        for t in checkpoints {
            print!("{:>9.4}", s.mean_at(t).map_or(f64::NAN, |p| p.mean.delta));
        }
        println!();
    }

    let baseline = result.get("random").expect("random ran").curve(MetricKind::Delta);
    for target in [0.03, 0.02] {
        for s in &result.strategies {
            let curve = s.curve(MetricKind::Delta);
            match (curve.first_crossing(target), budget_savings(&curve, &baseline, target)) {
                (Some(t), Ok(saved)) if s.label != "random" => println!("{:<12} reaches {target} at T = {t:.0} ({saved:+.1}% vs random)", s.label),
                (Some(t), _) => println!("{:<12} reaches {target} at T = {t:.0}", s.label),
                (None, _) => println!("{:<12} never reaches {target}", s.label),
            }
        }
    }
    Ok(())
}
