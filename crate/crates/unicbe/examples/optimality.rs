//! Spreading a fixed number of draws evenly over independent categories
//! minimizes the variance of their sum. Checks this exhaustively for small
//! sizes and by simulation for one case.

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use unicbe::scenarios::verify_uniform_optimality;

fn simulated_square(counts: &[u64], trials: usize, rng: &mut StdRng) -> f64 {
    let mut total = 0.0;
    for _ in 0..trials {
        let s: f64 = counts
            .iter()
            .map(|&c| {
                let z: f64 = StandardNormal.sample(rng);
                c as f64 * z
            })
            .sum::<f64>()
            / counts.iter().sum::<u64>() as f64;
        total += s * s;
    }
    total / trials as f64
}

fn main() -> anyhow::Result<()> {
    for (u, v) in [(3, 7), (4, 4), (5, 12), (6, 6)] {
        let r = verify_uniform_optimality(u, v)?;
        println!(
            "U={u} V={v}: {} vectors, minimum {} at {:?}, runner-up {:?}, {}",
            r.checked,
            r.minimum,
            r.canonical_minimizer(),
            r.runner_up,
            if r.pass { "balanced" } else { "NOT balanced" }
        );
    }

    let mut rng = StdRng::seed_from_u64(1);
    for counts in [[2u64, 2, 2, 2], [3, 2, 2, 1], [4, 2, 1, 1], [8, 0, 0, 0]] {
        let sum_sq: u64 = counts.iter().map(|c| c * c).sum();
        println!(
            "counts {counts:?}: squared error of the mean {:.4} (exact {:.4})",
            simulated_square(&counts, 200_000, &mut rng),
            sum_sq as f64 / 64.0
        );
    }
    Ok(())
}
