//! The three uniformity components and their weighted Hadamard combination.
//!
//! * accuracy: `α^-(pair count + count of m_i on s_k + count of m_j on s_k)`
//!   favours tuples whose model pair and model–sample cells are least used;
//! * convergence: the win-rate uncertainty `ε_ij`, constant over samples;
//! * scalability: `α^-(total_i + total_j)`, favouring models with little budget.
//!
//! Weights are handled in log space so that `α^-x` never underflows and
//! tuples with equal integer exponents compare exactly equal.

use rand::Rng;

use crate::session::{pair_index, CountSnapshot, ModelId, SampleId, Session, WinRateStats};

use super::{check_alpha, eligible_shape, AllocError, AllocationNote, ObjectiveWeights, SamplingTensor, Tuple};

fn all_pairs(m: usize) -> Vec<(ModelId, ModelId)> {
    let mut pairs = Vec::new();
    for i in 0..m as u32 {
        for j in (i + 1)..m as u32 {
            pairs.push((ModelId(i), ModelId(j)));
        }
    }
    pairs
}

fn sample_ids(n: usize) -> Vec<SampleId> {
    (0..n as u32).map(SampleId).collect()
}

/// Accuracy component over every model pair and sample in the snapshot.
pub fn p_acc(counts: &CountSnapshot, alpha: f64) -> Result<SamplingTensor, AllocError> {
    check_alpha(alpha)?;
    let m = counts.model_totals.len();
    let n = counts.model_sample_counts.first().map_or(0, Vec::len);
    let pairs = all_pairs(m);
    let ln_alpha = alpha.ln();
    let mut lw = Vec::with_capacity(pairs.len() * n);
    for &(a, b) in &pairs {
        let pc = counts.pair_counts[a.index()][b.index()];
        let row_a = &counts.model_sample_counts[a.index()];
        let row_b = &counts.model_sample_counts[b.index()];
        for k in 0..n {
            let e = pc + row_a[k] as u64 + row_b[k] as u64;
            lw.push(-ln_alpha * e as f64);
        }
    }
    let mask = vec![true; lw.len()];
    Ok(SamplingTensor::from_log_weights(pairs, sample_ids(n), lw, mask))
}

/// Convergence component: the smoothed `ε_ij` broadcast over `samples`
/// samples (see [`WinRateStats::smoothed_epsilon`]).
pub fn p_con(stats: &WinRateStats, samples: usize) -> SamplingTensor {
    let pairs = all_pairs(stats.models());
    let mut lw = Vec::with_capacity(pairs.len() * samples);
    for &(a, b) in &pairs {
        let e = stats.smoothed_epsilon(a, b).ln();
        lw.extend(std::iter::repeat(e).take(samples));
    }
    let mask = vec![true; lw.len()];
    SamplingTensor::from_log_weights(pairs, sample_ids(samples), lw, mask)
}

/// Scalability component: `α^-(total_i + total_j)`, constant over samples.
pub fn p_sca(counts: &CountSnapshot, alpha: f64) -> Result<SamplingTensor, AllocError> {
    check_alpha(alpha)?;
    let m = counts.model_totals.len();
    let n = counts.model_sample_counts.first().map_or(0, Vec::len);
    let pairs = all_pairs(m);
    let ln_alpha = alpha.ln();
    let mut lw = Vec::with_capacity(pairs.len() * n);
    for &(a, b) in &pairs {
        let e = counts.model_totals[a.index()] + counts.model_totals[b.index()];
        lw.extend(std::iter::repeat(-ln_alpha * e as f64).take(n));
    }
    let mask = vec![true; lw.len()];
    Ok(SamplingTensor::from_log_weights(pairs, sample_ids(n), lw, mask))
}

/// `θ · ln w`, with `w^0 = 1` for every `w` including zero.
fn weighted(theta: f64, lw: f64) -> f64 {
    if theta == 0.0 {
        0.0
    } else {
        theta * lw
    }
}

/// Normalized Hadamard product `acc^θacc ∘ con^θcon ∘ sca^θsca`.
///
/// Falls back to `acc` alone when every eligible product is zero.
pub fn combine(
    acc: &SamplingTensor,
    con: &SamplingTensor,
    sca: &SamplingTensor,
    weights: ObjectiveWeights,
) -> Result<SamplingTensor, AllocError> {
    weights.validate()?;
    if !acc.same_shape(con) || !acc.same_shape(sca) {
        return Err(AllocError::ShapeMismatch);
    }
    let lw: Vec<f64> = acc
        .log_weights()
        .iter()
        .zip(con.log_weights())
        .zip(sca.log_weights())
        .map(|((a, c), s)| {
            weighted(weights.theta_acc, *a) + weighted(weights.theta_con, *c) + weighted(weights.theta_sca, *s)
        })
        .collect();
    let out = SamplingTensor::from_log_weights(
        acc.pairs().to_vec(),
        acc.samples().to_vec(),
        lw,
        acc.mask().to_vec(),
    );
    if out.has_mass() || !acc.has_mass() {
        Ok(out)
    } else {
        Ok(acc.clone().with_note(AllocationNote::ZeroProductFallback))
    }
}

/// UniCBE allocation with the default objective weights.
pub fn allocate_unicbe(session: &Session) -> Result<SamplingTensor, AllocError> {
    allocate_with(session, ObjectiveWeights::default())
}

/// Fused evaluation of the combined tensor over the eligible active tuples.
pub(crate) fn allocate_with(session: &Session, w: ObjectiveWeights) -> Result<SamplingTensor, AllocError> {
    w.validate()?;
    let (pairs, samples, mask) = eligible_shape(session)?;
    let ledger = session.ledger();
    let stats = session.stats();
    let ln_alpha = w.alpha.ln();
    let n = samples.len();

    let mut lw = vec![f64::NEG_INFINITY; pairs.len() * n];
    let mut acc_only = vec![f64::NEG_INFINITY; pairs.len() * n];
    let mut any_mass = false;
    for (p, &(a, b)) in pairs.iter().enumerate() {
        let pc = ledger.pair_total(a, b);
        let sca = ledger.model_total(a) + ledger.model_total(b);
        let con = weighted(w.theta_con, stats.smoothed_epsilon(a, b).ln());
        let row_a = ledger.model_sample_row(a);
        let row_b = ledger.model_sample_row(b);
        for (s, &k) in samples.iter().enumerate() {
            let idx = p * n + s;
            if !mask[idx] {
                continue;
            }
            let acc = pc + row_a[k.index()] as u64 + row_b[k.index()] as u64;
            acc_only[idx] = -ln_alpha * acc as f64;
            let v = con - ln_alpha * (w.theta_acc * acc as f64 + w.theta_sca * sca as f64);
            if v > f64::NEG_INFINITY {
                any_mass = true;
            }
            lw[idx] = v;
        }
    }
    if any_mass {
        Ok(SamplingTensor::from_log_weights(pairs, samples, lw, mask))
    } else {
        Ok(SamplingTensor::from_log_weights(pairs, samples, acc_only, mask)
            .with_note(AllocationNote::ZeroProductFallback))
    }
}

/// Greedy choice over the fused weights without building the tensor.
///
/// Within a pair the weight only decreases as the tuple count grows, so each
/// pair's best entries are its least-used open samples. Ties are gathered in
/// tensor order and broken exactly as [`super::sample_greedy`] would, so this
/// picks the same tuple as `allocate_with` followed by greedy sampling.
pub(crate) fn greedy_pick<R: Rng + ?Sized>(
    session: &Session,
    w: ObjectiveWeights,
    rng: &mut R,
) -> Result<Tuple, AllocError> {
    w.validate()?;
    let models = session.active_models();
    if models.len() < 2 {
        return Err(AllocError::TooFewModels);
    }
    let samples = session.active_samples();
    if samples.is_empty() {
        return Err(AllocError::NoSamples);
    }
    let ledger = session.ledger();
    let stats = session.stats();
    let ln_alpha = w.alpha.ln();
    let check_blocked = session.has_blocked();
    let open = |p: usize, a: ModelId, b: ModelId, k: SampleId| {
        ledger.count_by_pair(p, k.index()) == 0 && !(check_blocked && session.is_blocked(Tuple::new(a, b, k)))
    };

    struct PairBest {
        a: ModelId,
        b: ModelId,
        p: usize,
        con: f64,
        sca: u64,
        pc: u64,
        min_acc: Option<u64>,
    }
    let mut pairs = Vec::with_capacity(models.len() * (models.len() - 1) / 2);
    for (x, &a) in models.iter().enumerate() {
        for &b in &models[x + 1..] {
            let p = pair_index(a.index(), b.index());
            let pc = ledger.pair_total(a, b);
            let row_a = ledger.model_sample_row(a);
            let row_b = ledger.model_sample_row(b);
            let mut min_acc: Option<u64> = None;
            for &k in &samples {
                if open(p, a, b, k) {
                    let acc = pc + row_a[k.index()] as u64 + row_b[k.index()] as u64;
                    min_acc = Some(min_acc.map_or(acc, |m| m.min(acc)));
                }
            }
            pairs.push(PairBest {
                a,
                b,
                p,
                con: weighted(w.theta_con, stats.smoothed_epsilon(a, b).ln()),
                sca: ledger.model_total(a) + ledger.model_total(b),
                pc,
                min_acc,
            });
        }
    }
    if pairs.iter().all(|q| q.min_acc.is_none()) {
        return Err(AllocError::Exhausted);
    }

    let fused = |q: &PairBest, acc: u64| q.con - ln_alpha * (w.theta_acc * acc as f64 + w.theta_sca * q.sca as f64);
    let acc_only = |_: &PairBest, acc: u64| -ln_alpha * acc as f64;
    let any_mass = pairs
        .iter()
        .any(|q| q.min_acc.is_some_and(|m| fused(q, m) > f64::NEG_INFINITY));
    let value: &dyn Fn(&PairBest, u64) -> f64 = if any_mass { &fused } else { &acc_only };

    let best = pairs
        .iter()
        .filter_map(|q| q.min_acc.map(|m| value(q, m)))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut ties = Vec::new();
    for q in &pairs {
        if q.min_acc.map(|m| value(q, m)) != Some(best) {
            continue;
        }
        let row_a = ledger.model_sample_row(q.a);
        let row_b = ledger.model_sample_row(q.b);
        for &k in &samples {
            if open(q.p, q.a, q.b, k) {
                let acc = q.pc + row_a[k.index()] as u64 + row_b[k.index()] as u64;
                if value(q, acc) == best {
                    ties.push(Tuple::new(q.a, q.b, k));
                }
            }
        }
    }
    Ok(match ties.len() {
        1 => ties[0],
        n => ties[rng.random_range(0..n)],
    })
}
