//! Varies the exponents on the three uniformity objectives and reports the
//! resulting error and per-objective uniformity at a fixed budget.

use unicbe::allocation::Strategy;
use unicbe::scenarios::{run, ScenarioConfig, Seeds, StrategySpec};
use unicbe::{ObjectiveWeights, Sampler};

fn weights(theta_acc: f64, theta_con: f64, theta_sca: f64) -> ObjectiveWeights {
    ObjectiveWeights {
        theta_acc,
        theta_con,
        theta_sca,
        ..ObjectiveWeights::default()
    }
}

fn main() -> anyhow::Result<()> {
    let variants = [
        ("all", weights(1.0, 1.0, 1.0)),
        ("no_acc", weights(0.0, 1.0, 1.0)),
        ("no_con", weights(1.0, 0.0, 1.0)),
        ("no_sca", weights(1.0, 1.0, 0.0)),
        ("acc_x2", weights(2.0, 1.0, 1.0)),
    ];
    let mut strategies: Vec<StrategySpec> = variants
        .iter()
        .map(|(label, w)| StrategySpec::new(Strategy::UniCbe(*w)).with_label(*label))
        .collect();
    strategies.push(
        StrategySpec::new(Strategy::UniCbe(ObjectiveWeights::default()))
            .with_sampler(Sampler::Temperature(1.0))
            .with_label("all_t1"),
    );
    let budget = 1500;
    let cfg = ScenarioConfig::synthetic(10, 200, budget, strategies, Seeds::Range { start: 0, count: 6 });
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let result = run(&cfg, jobs)?;

    println!("{:<8}{:>9}{:>9}{:>10}{:>10}{:>10}", "variant", "delta", "r_p", "beta_acc", "beta_con", "beta_sca");
    for s in &result.strategies {
        let p = s.mean_at(budget).expect("final point").mean;
        println!(
            "{:<8}{:>9.4}{:>9.4}{:>10.4}{:>10.4}{:>10.4}",
            s.label, p.delta, p.r_p, p.beta_acc, p.beta_con, p.beta_sca
        );
    }
    Ok(())
}
