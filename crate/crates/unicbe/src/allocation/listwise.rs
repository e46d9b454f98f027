//! List-wise allocation: choose `K` models and one sample per judgment.
//!
//! A `K`-subset on a sample is weighted by the product of the pairwise
//! UniCBE weights (judged or not) of the pairs it contains, and is eligible
//! while at least one of those pairs is still unjudged on the sample. With `K = 2` the
//! configured pairwise strategy and sampler are used unchanged.

use crate::session::{ModelId, SampleId, Session};

use super::{AllocError, ObjectiveWeights, Strategy};

fn subsets(items: &[ModelId], k: usize) -> Vec<Vec<ModelId>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    let n = items.len();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let mut pos = k;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if idx[pos] != pos + n - k {
                break;
            }
        }
        idx[pos] += 1;
        for q in pos + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Picks the models and sample for the next list-wise judgment.
pub fn allocate_listwise(session: &mut Session, k: usize) -> Result<(Vec<ModelId>, SampleId), AllocError> {
    if k < 2 {
        return Err(AllocError::ListTooSmall(k));
    }
    let models = session.active_models();
    if models.len() < 2 {
        return Err(AllocError::TooFewModels);
    }
    if k > models.len() {
        return Err(AllocError::ListTooLarge { k, models: models.len() });
    }
    if k == 2 {
        let t = session.next_tuple()?;
        return Ok((vec![t.a, t.b], t.sample));
    }
    let samples = session.active_samples();
    if samples.is_empty() {
        return Err(AllocError::NoSamples);
    }
    let w = match session.config().strategy {
        Strategy::UniCbe(w) => w,
        _ => ObjectiveWeights::default(),
    };
    w.validate()?;
    let ln_alpha = w.alpha.ln();
    let ledger = session.ledger();
    let stats = session.stats();

    let lists = subsets(&models, k);
    let n = samples.len();
    let mut lw = vec![f64::NEG_INFINITY; lists.len() * n];
    let mut acc_only = vec![f64::NEG_INFINITY; lists.len() * n];
    let mut mask = vec![false; lists.len() * n];
    for (l, list) in lists.iter().enumerate() {
        let mut pair_part = 0.0;
        let mut pair_count = 0u64;
        for (x, &a) in list.iter().enumerate() {
            for &b in &list[x + 1..] {
                let eps = stats.smoothed_epsilon(a, b);
                pair_part += if w.theta_con == 0.0 { 0.0 } else { w.theta_con * eps.ln() };
                pair_count += ledger.pair_total(a, b);
            }
        }
        let sca: u64 = list.iter().map(|&a| (k - 1) as u64 * ledger.model_total(a)).sum();
        for (s, &sample) in samples.iter().enumerate() {
            let idx = l * n + s;
            let mut open = false;
            let mut cell = 0u64;
            for (x, &a) in list.iter().enumerate() {
                cell += (k - 1) as u64 * ledger.model_sample_count(a, sample) as u64;
                for &b in &list[x + 1..] {
                    if ledger.count(a, b, sample) == 0 && !session.is_blocked(super::Tuple::new(a, b, sample)) {
                        open = true;
                    }
                }
            }
            if !open {
                continue;
            }
            mask[idx] = true;
            let acc = (pair_count + cell) as f64;
            acc_only[idx] = -ln_alpha * acc;
            lw[idx] = pair_part - ln_alpha * (w.theta_acc * acc + w.theta_sca * sca as f64);
        }
    }
    if !mask.iter().any(|m| *m) {
        return Err(AllocError::Exhausted);
    }
    let sampler = session.config().sampler;
    let any_mass = lw.iter().any(|v| *v > f64::NEG_INFINITY);
    let weights = if any_mass { &lw } else { &acc_only };
    let idx = sampler.sample_log(weights, &mask, session.rng_mut())?;
    Ok((lists[idx / n].clone(), samples[idx % n]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{PreferenceRecord, SessionConfig};

    #[test]
    fn subsets_are_lexicographic() {
        let items: Vec<ModelId> = (0..4).map(ModelId).collect();
        let s = subsets(&items, 3);
        assert_eq!(s.len(), 4);
        assert_eq!(s[0], vec![ModelId(0), ModelId(1), ModelId(2)]);
        assert_eq!(s[3], vec![ModelId(1), ModelId(2), ModelId(3)]);
        assert_eq!(subsets(&items, 4).len(), 1);
        assert_eq!(subsets(&items, 2).len(), 6);
    }

    #[test]
    fn rejects_bad_sizes() {
        let mut s = Session::with_sizes(3, 2, SessionConfig::default(), 0);
        assert_eq!(allocate_listwise(&mut s, 1), Err(AllocError::ListTooSmall(1)));
        assert_eq!(
            allocate_listwise(&mut s, 4),
            Err(AllocError::ListTooLarge { k: 4, models: 3 })
        );
    }

    #[test]
    fn prefers_lists_with_unused_pairs() {
        let mut s = Session::with_sizes(4, 1, SessionConfig::default(), 0);
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            s.record(PreferenceRecord::new(ModelId(a), ModelId(b), SampleId(0), 1.0))
                .unwrap();
        }
        // {0,1,2} is fully judged; every other triple contains model 3.
        for _ in 0..20 {
            let (list, _) = allocate_listwise(&mut s, 3).unwrap();
            assert!(list.contains(&ModelId(3)));
        }
    }

    #[test]
    fn exhausted_when_every_pair_is_judged() {
        let mut s = Session::with_sizes(3, 1, SessionConfig::default(), 0);
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            s.record(PreferenceRecord::new(ModelId(a), ModelId(b), SampleId(0), 1.0))
                .unwrap();
        }
        assert_eq!(allocate_listwise(&mut s, 3), Err(AllocError::Exhausted));
    }
}
