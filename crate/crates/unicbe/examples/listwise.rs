//! List-wise judging: each query ranks K outputs on one sample and is expanded
//! into K(K-1)/2 pairwise records. Compares how fast the error falls for
//! K = 2, 3 and 4 under the same number of recorded comparisons.

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::SeedableRng;
use unicbe::aggregation::empirical_win_matrix;
use unicbe::judges::{synth_ground_truth, BiasParams, CopelandRanker, JudgeMode, SyntheticJudge};
use unicbe::metrics::{full_traversal, win_rate_error};
use unicbe::{Session, SessionConfig};

fn main() -> anyhow::Result<()> {
    let (m, n, comparisons) = (8, 100, 1200u64);
    let gt = Arc::new(synth_ground_truth(m, n, BiasParams::default(), &mut StdRng::seed_from_u64(3))?);
    let all: Vec<_> = (0..m as u32).map(unicbe::ModelId).collect();
    let truth = empirical_win_matrix(&full_traversal(&gt), &all);

    for k in [2, 3, 4] {
        let mut session = Session::with_sizes(m, n, SessionConfig::default(), 3);
        let mut ranker = CopelandRanker {
            judge: SyntheticJudge::new(gt.clone(), JudgeMode::Bernoulli { tie_prob: 0.1 }, 3),
        };
        let mut queries = 0;
        while session.budget_used() < comparisons {
            if session.step_listwise(&mut ranker, k)?.is_none() {
                break;
            }
            queries += 1;
        }
        let est = empirical_win_matrix(session.records(), &session.active_models());
        println!(
            "K = {k}: {queries:>4} ranking queries, {:>4} comparisons, delta {:.4}",
            session.budget_used(),
            win_rate_error(&est, &truth)?
        );
    }
    Ok(())
}
