//! How far single-sample and single-opponent estimates stray from the
//! full-data scores, on a fully traversed synthetic tensor. Also lists cyclic
//! triplets in the observed win matrix.

use rand::rngs::StdRng;
use rand::SeedableRng;
use unicbe::aggregation::empirical_win_matrix;
use unicbe::judges::{synth_ground_truth, BiasParams};
use unicbe::metrics::{bias_analysis, detect_nontransitive_triplets, full_traversal};
use unicbe::{Aggregator, ModelId, SampleId};

fn main() -> anyhow::Result<()> {
    let (m, n) = (8, 200);
    let gt = synth_ground_truth(m, n, BiasParams::default(), &mut StdRng::seed_from_u64(5))?;
    let records = full_traversal(&gt);
    let models: Vec<ModelId> = (0..m as u32).map(ModelId).collect();
    let samples: Vec<SampleId> = (0..n as u32).map(SampleId).collect();

    for aggregator in [Aggregator::Avg, Aggregator::bt(), Aggregator::elo()] {
        let report = bias_analysis(&records, &models, &samples, &aggregator, 10)?;
        println!(
            "{:<4} mean sample bias {:.4}, mean model bias {:.4}",
            format!("{:?}", aggregator.kind()),
            report.mean_sample_bias,
            report.mean_model_bias
        );
        if matches!(aggregator, Aggregator::Avg) {
            let h = &report.sample_histogram;
            println!("     sample bias histogram {:?}", h.counts);
        }
    }

    let win = empirical_win_matrix(&records, &models);
    let counts = vec![vec![n as u64; m]; m];
    let cycles = detect_nontransitive_triplets(&win, 1, &counts);
    println!("{} non-transitive triplet(s): {cycles:?}", cycles.len());
    Ok(())
}
