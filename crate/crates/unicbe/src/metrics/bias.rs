//! Per-sample and per-opponent score bias of a full traversal, and
//! non-transitive triplets in a win-rate matrix.

use serde::{Deserialize, Serialize};

use crate::aggregation::{normalize, Aggregator, Normalization};
use crate::judges::GroundTruthTensor;
use crate::session::{ModelId, PreferenceRecord, SampleId};

use super::MetricError;

/// Equal-width histogram over `[0, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let max = values.iter().copied().fold(0.0, f64::max);
        let width = if max > 0.0 { max / bins as f64 } else { 1.0 };
        let edges = (0..=bins).map(|b| b as f64 * width).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let b = ((v / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self { edges, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Score deviations of single-sample and single-opponent estimates from the
/// full-data estimate `û` (normalized to mean one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub u_hat: Vec<f64>,
    /// Mean over models of `|η|` for each sample.
    pub per_sample: Vec<f64>,
    /// `|η|` of model `i` scored only against opponent `j`; diagonal 0.
    pub per_pair: Vec<Vec<f64>>,
    pub mean_sample_bias: f64,
    pub mean_model_bias: f64,
    pub sample_histogram: Histogram,
}

/// Every tuple of `gt` judged once with its soft value, lower index first.
pub fn full_traversal(gt: &GroundTruthTensor) -> Vec<PreferenceRecord> {
    let m = gt.models() as u32;
    let n = gt.samples() as u32;
    let mut out = Vec::with_capacity((n * m * (m - 1) / 2) as usize);
    for a in 0..m {
        for b in a + 1..m {
            for k in 0..n {
                let r = gt.r_hat(ModelId(a), ModelId(b), SampleId(k));
                out.push(PreferenceRecord::new(ModelId(a), ModelId(b), SampleId(k), r));
            }
        }
    }
    out
}

/// Bias analysis of a full traversal.
///
/// Per-sample scores aggregate the records of one sample and are normalized
/// to mean one like `û`. Per-opponent scores aggregate the records of one
/// pair; they are shifted (or scaled, for non-additive scores) so the pair's
/// mean equals the mean of the two `û` values before taking differences.
pub fn bias_analysis(
    records: &[PreferenceRecord],
    models: &[ModelId],
    samples: &[SampleId],
    aggregator: &Aggregator,
    bins: usize,
) -> Result<BiasReport, MetricError> {
    let full = normalize(&aggregator.aggregate(records, models)?, Normalization::MeanOne)?;
    let u_hat = full.values.clone();
    let m = models.len();

    let mut by_sample: Vec<Vec<PreferenceRecord>> = vec![Vec::new(); samples.len()];
    let sample_pos: std::collections::HashMap<SampleId, usize> =
        samples.iter().enumerate().map(|(i, &k)| (k, i)).collect();
    let model_pos: std::collections::HashMap<ModelId, usize> =
        models.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let mut by_pair: Vec<Vec<Vec<PreferenceRecord>>> = vec![vec![Vec::new(); m]; m];
    for rec in records {
        let (Some(&a), Some(&b)) = (model_pos.get(&rec.a), model_pos.get(&rec.b)) else {
            continue;
        };
        if let Some(&s) = sample_pos.get(&rec.sample) {
            by_sample[s].push(*rec);
            by_pair[a.min(b)][a.max(b)].push(*rec);
        }
    }

    let mut per_sample = Vec::with_capacity(samples.len());
    for recs in &by_sample {
        let scores = normalize(&aggregator.aggregate(recs, models)?, Normalization::MeanOne)?;
        let eta: f64 = scores
            .values
            .iter()
            .zip(&u_hat)
            .map(|(u, h)| (u - h).abs())
            .sum::<f64>()
            / m as f64;
        per_sample.push(eta);
    }

    let additive = matches!(aggregator, Aggregator::Bt { .. });
    let mut per_pair = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let pair = [models[i], models[j]];
            let s = aggregator.aggregate(&by_pair[i][j], &pair)?;
            let target = (u_hat[i] + u_hat[j]) / 2.0;
            let mean = (s.values[0] + s.values[1]) / 2.0;
            let (ui, uj) = if additive {
                (s.values[0] - mean + target, s.values[1] - mean + target)
            } else if mean != 0.0 {
                (s.values[0] / mean * target, s.values[1] / mean * target)
            } else {
                (target, target)
            };
            per_pair[i][j] = (ui - u_hat[i]).abs();
            per_pair[j][i] = (uj - u_hat[j]).abs();
        }
    }

    let mean_sample_bias = per_sample.iter().sum::<f64>() / per_sample.len().max(1) as f64;
    let off_diag = (m * m.saturating_sub(1)).max(1) as f64;
    let mean_model_bias = per_pair.iter().flatten().sum::<f64>() / off_diag;
    Ok(BiasReport {
        u_hat,
        sample_histogram: Histogram::new(&per_sample, bins),
        per_sample,
        per_pair,
        mean_sample_bias,
        mean_model_bias,
    })
}

/// Unordered triplets whose majority relation is cyclic. Pairs compared
/// fewer than `min_count` times are ignored.
pub fn detect_nontransitive_triplets(
    win: &[Vec<f64>],
    min_count: u64,
    counts: &[Vec<u64>],
) -> Vec<(usize, usize, usize)> {
    let m = win.len();
    let ok = |a: usize, b: usize| counts[a][b] >= min_count;
    let beats = |a: usize, b: usize| win[a][b] > 0.5;
    let mut out = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            for k in (j + 1)..m {
                if !(ok(i, j) && ok(j, k) && ok(i, k)) {
                    continue;
                }
                let forward = beats(i, j) && beats(j, k) && beats(k, i);
                let backward = beats(j, i) && beats(k, j) && beats(i, k);
                if forward || backward {
                    out.push((i, j, k));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judges::{synth_ground_truth, BiasParams};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn ids(m: usize, n: usize) -> (Vec<ModelId>, Vec<SampleId>) {
        (
            (0..m as u32).map(ModelId).collect(),
            (0..n as u32).map(SampleId).collect(),
        )
    }

    #[test]
    fn zero_bias_tensor_has_no_bias() {
        let gt = GroundTruthTensor::from_scores(vec![0.5, -0.2, 0.1, -0.4], 5);
        let (models, samples) = ids(4, 5);
        let agg = Aggregator::Bt {
            l2: 0.0,
            tol: 1e-12,
            max_iters: 200,
        };
        let rep = bias_analysis(&full_traversal(&gt), &models, &samples, &agg, 10).unwrap();
        assert!(rep.per_sample.iter().all(|e| *e < 1e-6));
        assert!(rep.per_pair.iter().flatten().all(|e| *e < 1e-6));
        assert_eq!(rep.sample_histogram.total(), 5);
    }

    #[test]
    fn sample_bias_dominates_model_bias() {
        let params = BiasParams {
            sample_bias_sd: 0.5,
            model_bias_sd: 0.1,
            noise_sd: 0.0,
        };
        let gt = synth_ground_truth(6, 60, params, &mut StdRng::seed_from_u64(3)).unwrap();
        let (models, samples) = ids(6, 60);
        let rep = bias_analysis(&full_traversal(&gt), &models, &samples, &Aggregator::bt(), 12).unwrap();
        assert!(rep.mean_sample_bias > rep.mean_model_bias);
        assert_eq!(rep.sample_histogram.total(), 60);
    }

    #[test]
    fn cycles() {
        let transitive = vec![vec![0.5, 0.7, 0.8], vec![0.3, 0.5, 0.6], vec![0.2, 0.4, 0.5]];
        let counts = vec![vec![10; 3]; 3];
        assert!(detect_nontransitive_triplets(&transitive, 1, &counts).is_empty());
        let rps = vec![vec![0.5, 0.7, 0.3], vec![0.3, 0.5, 0.7], vec![0.7, 0.3, 0.5]];
        assert_eq!(detect_nontransitive_triplets(&rps, 1, &counts), vec![(0, 1, 2)]);
        assert!(detect_nontransitive_triplets(&rps, 11, &counts).is_empty());
    }

    #[test]
    fn histogram_counts_everything() {
        let h = Histogram::new(&[0.0, 0.1, 0.2, 0.2, 1.0], 4);
        assert_eq!(h.total(), 5);
        assert_eq!(h.counts[3], 1);
        assert_eq!(Histogram::new(&[0.0, 0.0], 3).total(), 2);
    }
}
