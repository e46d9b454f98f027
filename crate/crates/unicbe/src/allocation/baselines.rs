//! Baseline strategies: uniform random, uncertainty-reduction (arena-style)
//! and fixed-reference (alpaca-eval-style).

use rand::Rng;

use crate::session::{pair_index, ModelId, SampleId, Session};

use super::{eligible_shape, AllocError, AllocationNote, SamplingTensor, Tuple};

/// Uniform over the eligible tuples.
pub fn allocate_random(session: &Session) -> Result<SamplingTensor, AllocError> {
    let (pairs, samples, mask) = eligible_shape(session)?;
    Ok(SamplingTensor::uniform(pairs, samples, mask))
}

/// A uniform draw over the eligible tuples without building the tensor.
pub(crate) fn uniform_pick<R: Rng + ?Sized>(session: &Session, rng: &mut R) -> Result<Tuple, AllocError> {
    let models = session.active_models();
    if models.len() < 2 {
        return Err(AllocError::TooFewModels);
    }
    let samples = session.active_samples();
    if samples.is_empty() {
        return Err(AllocError::NoSamples);
    }
    let ledger = session.ledger();
    let check_blocked = session.has_blocked();
    let mut pairs = Vec::with_capacity(models.len() * (models.len() - 1) / 2);
    for (x, &a) in models.iter().enumerate() {
        for &b in &models[x + 1..] {
            pairs.push((a, b, pair_index(a.index(), b.index())));
        }
    }
    let open = |&(a, b, p): &(ModelId, ModelId, usize), k: SampleId| {
        ledger.count_by_pair(p, k.index()) == 0 && !(check_blocked && session.is_blocked(Tuple::new(a, b, k)))
    };
    let total: usize = pairs
        .iter()
        .map(|q| samples.iter().filter(|&&k| open(q, k)).count())
        .sum();
    if total == 0 {
        return Err(AllocError::Exhausted);
    }
    let mut target = rng.random_range(0..total);
    for q in &pairs {
        for &k in &samples {
            if open(q, k) {
                if target == 0 {
                    return Ok(Tuple::new(q.0, q.1, k));
                }
                target -= 1;
            }
        }
    }
    unreachable!("target is below the eligible count")
}

/// Spreads a per-pair mass evenly over each pair's eligible samples.
fn spread(
    pairs: Vec<(ModelId, ModelId)>,
    samples: Vec<SampleId>,
    mask: Vec<bool>,
    pair_mass: &[f64],
) -> SamplingTensor {
    let n = samples.len();
    let mut w = vec![0.0; mask.len()];
    for (p, &mass) in pair_mass.iter().enumerate() {
        let row = &mask[p * n..(p + 1) * n];
        let open = row.iter().filter(|m| **m).count();
        if open == 0 || mass <= 0.0 {
            continue;
        }
        for (s, &ok) in row.iter().enumerate() {
            if ok {
                w[p * n + s] = mass / open as f64;
            }
        }
    }
    SamplingTensor::from_weights(pairs, samples, &w, mask)
}

fn has_open(mask: &[bool], p: usize, n: usize) -> bool {
    mask[p * n..(p + 1) * n].iter().any(|m| *m)
}

/// Pair mass proportional to the uncertainty reduction one more judgment
/// would bring; uniform over the pair's unjudged samples.
pub fn allocate_arena(session: &Session) -> Result<SamplingTensor, AllocError> {
    let (pairs, samples, mask) = eligible_shape(session)?;
    let n = samples.len();
    let stats = session.stats();
    let mass: Vec<f64> = pairs
        .iter()
        .enumerate()
        .map(|(p, &(a, b))| {
            if has_open(&mask, p, n) {
                stats.uncertainty_reduction(a, b).unwrap_or(0.0)
            } else {
                0.0
            }
        })
        .collect();
    if mass.iter().all(|m| *m <= 0.0) {
        return Ok(SamplingTensor::uniform(pairs, samples, mask).with_note(AllocationNote::UniformFallback));
    }
    Ok(spread(pairs, samples, mask, &mass))
}

/// All mass on pairs with `reference`, concentrated on the non-reference
/// model(s) with the fewest comparisons against it. Once every reference
/// pair is judged the remaining tuples are allocated uniformly.
pub fn allocate_alpacaeval(session: &Session, reference: ModelId) -> Result<SamplingTensor, AllocError> {
    if !session.models().contains(reference.0) {
        return Err(AllocError::UnknownReference(reference));
    }
    let (pairs, samples, mask) = eligible_shape(session)?;
    let n = samples.len();
    let ledger = session.ledger();

    let mut fewest = u64::MAX;
    let mut candidates = Vec::new();
    for (p, &(a, b)) in pairs.iter().enumerate() {
        if (a != reference && b != reference) || !has_open(&mask, p, n) {
            continue;
        }
        let c = ledger.pair_total(a, b);
        if c < fewest {
            fewest = c;
            candidates.clear();
        }
        if c == fewest {
            candidates.push(p);
        }
    }
    if candidates.is_empty() {
        return Ok(SamplingTensor::uniform(pairs, samples, mask).with_note(AllocationNote::ReferenceExhausted));
    }
    let mut mass = vec![0.0; pairs.len()];
    for &p in &candidates {
        mass[p] = 1.0 / candidates.len() as f64;
    }
    Ok(spread(pairs, samples, mask, &mass))
}
