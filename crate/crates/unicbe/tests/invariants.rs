//! Estimator invariants over random record streams.

use proptest::prelude::*;
use unicbe::metrics::beta_metrics;
use unicbe::session::{ModelId, PreferenceRecord, SampleId, Session, SessionConfig};

#[derive(Debug, Clone)]
struct Stream {
    models: usize,
    samples: usize,
    records: Vec<PreferenceRecord>,
}

fn outcome() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(0.5), Just(1.0), 0.0..=1.0f64]
}

fn stream() -> impl Strategy<Value = Stream> {
    (2usize..7, 1usize..6).prop_flat_map(|(m, n)| {
        let rec = (0..m as u32, 1..m as u32, 0..n as u32, outcome()).prop_map(move |(a, off, k, r)| {
            let b = (a + off) % m as u32;
            PreferenceRecord::new(ModelId(a), ModelId(b), SampleId(k), r)
        });
        prop::collection::vec(rec, 0..60).prop_map(move |records| Stream {
            models: m,
            samples: n,
            records,
        })
    })
}

fn feed(s: &Stream) -> Session {
    let mut session = Session::with_sizes(s.models, s.samples, SessionConfig::default(), 0);
    for r in &s.records {
        session.record(*r).unwrap();
    }
    session
}

fn ids(m: usize) -> impl Iterator<Item = ModelId> + Clone {
    (0..m as u32).map(ModelId)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn phi_is_antisymmetric(s in stream()) {
        let session = feed(&s);
        let st = session.stats();
        for i in ids(s.models) {
            prop_assert_eq!(st.phi(i, i), 0.5);
            for j in ids(s.models) {
                if i != j && st.n(i, j) > 0 {
                    prop_assert_eq!(st.phi(i, j) + st.phi(j, i), 1.0);
                }
            }
        }
    }

    #[test]
    fn theta_is_a_bounded_symmetric_variance(s in stream()) {
        let session = feed(&s);
        let st = session.stats();
        for i in ids(s.models) {
            for j in ids(s.models) {
                let t = st.theta(i, j);
                prop_assert!((0.0..=0.25).contains(&t), "theta {t}");
                prop_assert_eq!(t, st.theta(j, i));
                let e = st.epsilon(i, j);
                prop_assert!(e >= 0.0 && e.is_finite());
                if i != j {
                    prop_assert!(st.smoothed_epsilon(i, j) > 0.0);
                }
            }
        }
    }

    #[test]
    fn replay_is_bitwise_deterministic(s in stream()) {
        let session = feed(&s);
        let again = session.replay(session.records()).unwrap();
        prop_assert!(again.stats().bitwise_eq(session.stats()));
        prop_assert_eq!(again.records(), session.records());
        for i in ids(s.models) {
            for j in ids(s.models) {
                prop_assert_eq!(again.stats().n(i, j), session.stats().n(i, j));
                prop_assert_eq!(again.ledger().pair_total(i, j), session.ledger().pair_total(i, j));
            }
        }
    }

    #[test]
    fn beta_lies_in_unit_interval(s in stream()) {
        let session = feed(&s);
        let models: Vec<ModelId> = ids(s.models).collect();
        let samples: Vec<SampleId> = (0..s.samples as u32).map(SampleId).collect();
        // Undefined reports (zero count or uncertainty vectors) are errors, not values.
        if let Ok(b) = beta_metrics(session.ledger(), session.stats(), &models, &samples) {
            for v in [b.beta_acc, b.beta_con, b.beta_sca] {
                prop_assert!((0.0..=1.0).contains(&v), "beta {v}");
            }
        }
    }
}
