//! Exhaustive check that spreading `V` draws evenly over `U` zero-mean
//! categories minimizes the expected squared error of their sum.
//!
//! Drawing category `i` `c_i` times (the same value each time) gives a sum
//! with variance `Σ c_i² Var(X_i)`; with equal variances the objective is
//! `Σ c_i²`.

use serde::{Deserialize, Serialize};

use super::ScenarioError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub u: usize,
    pub v: u64,
    /// Count vectors enumerated.
    pub checked: u64,
    pub minimum: u64,
    /// All count vectors attaining the minimum, in enumeration order.
    pub minimizers: Vec<Vec<u64>>,
    /// Smallest value among vectors that are not balanced, if any exist.
    pub runner_up: Option<u64>,
    /// Every minimizer is balanced (counts differ by at most one) and every
    /// balanced vector is a minimizer.
    pub pass: bool,
}

impl OptimalityReport {
    /// The minimizer with counts in descending order.
    pub fn canonical_minimizer(&self) -> Vec<u64> {
        let mut c = self.minimizers.first().cloned().unwrap_or_default();
        c.sort_unstable_by(|a, b| b.cmp(a));
        c
    }
}

pub fn is_balanced(c: &[u64]) -> bool {
    match (c.iter().max(), c.iter().min()) {
        (Some(hi), Some(lo)) => hi - lo <= 1,
        _ => true,
    }
}

/// `Σ c_i² Var_i`: the expected square of the sum of `c_i` copies of each
/// zero-mean category value.
pub fn expected_square(counts: &[u64], variances: &[f64]) -> f64 {
    counts
        .iter()
        .zip(variances)
        .map(|(&c, &var)| (c * c) as f64 * var)
        .sum()
}

/// Calls `f` on every vector of `u` nonnegative counts summing to `v`.
fn compositions(u: usize, v: u64, f: &mut impl FnMut(&[u64])) {
    fn rec(buf: &mut Vec<u64>, i: usize, left: u64, f: &mut impl FnMut(&[u64])) {
        if i + 1 == buf.len() {
            buf[i] = left;
            f(buf);
            return;
        }
        for c in (0..=left).rev() {
            buf[i] = c;
            rec(buf, i + 1, left - c, f);
        }
    }
    let mut buf = vec![0; u];
    rec(&mut buf, 0, v, f);
}

pub const MAX_CATEGORIES: usize = 12;

pub fn verify_uniform_optimality(u: usize, v: u64) -> Result<OptimalityReport, ScenarioError> {
    if u == 0 || u > MAX_CATEGORIES {
        return Err(ScenarioError::Config {
            field: "u".into(),
            message: format!("must lie in 1..={MAX_CATEGORIES}"),
        });
    }
    if v > 4 * MAX_CATEGORIES as u64 {
        return Err(ScenarioError::Config {
            field: "v".into(),
            message: format!("must be at most {}", 4 * MAX_CATEGORIES),
        });
    }
    let mut checked = 0u64;
    let mut minimum = u64::MAX;
    let mut minimizers: Vec<Vec<u64>> = Vec::new();
    let mut runner_up: Option<u64> = None;
    let mut balanced = 0u64;
    let mut balanced_minimizers = 0u64;
    compositions(u, v, &mut |c| {
        checked += 1;
        let s: u64 = c.iter().map(|x| x * x).sum();
        if is_balanced(c) {
            balanced += 1;
        } else {
            runner_up = Some(runner_up.map_or(s, |r| r.min(s)));
        }
        if s < minimum {
            minimum = s;
            minimizers.clear();
        }
        if s == minimum {
            minimizers.push(c.to_vec());
        }
    });
    for c in &minimizers {
        if is_balanced(c) {
            balanced_minimizers += 1;
        }
    }
    let pass = balanced_minimizers == minimizers.len() as u64
        && balanced_minimizers == balanced
        && runner_up.is_none_or(|r| r > minimum);
    Ok(OptimalityReport {
        u,
        v,
        checked,
        minimum,
        minimizers,
        runner_up,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn binomial(n: u64, k: u64) -> u64 {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn examples() {
        let r = verify_uniform_optimality(4, 4).unwrap();
        assert!(r.pass);
        assert_eq!(r.minimizers, vec![vec![1, 1, 1, 1]]);
        assert_eq!((r.minimum, r.runner_up), (4, Some(6)));

        let r = verify_uniform_optimality(2, 4).unwrap();
        assert_eq!((r.minimizers.clone(), r.minimum), (vec![vec![2, 2]], 8));

        let r = verify_uniform_optimality(5, 1).unwrap();
        assert!(r.pass);
        assert_eq!(r.minimizers.len(), 5);
        assert_eq!(r.minimum, 1);

        let r = verify_uniform_optimality(3, 0).unwrap();
        assert!(r.pass);
        assert_eq!((r.checked, r.minimum), (1, 0));
    }

    #[test]
    fn enumeration_counts_compositions() {
        for u in 1..=6 {
            for v in 0..=6u64 {
                let r = verify_uniform_optimality(u, v).unwrap();
                assert_eq!(r.checked, binomial(v + u as u64 - 1, u as u64 - 1));
            }
        }
    }

    #[test]
    fn expected_square_matches_simulation() {
        // Category values are ±1 with equal probability: mean 0, variance 1.
        let counts = [3u64, 1, 0, 2];
        let mut rng = StdRng::seed_from_u64(2);
        let trials = 200_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let s: f64 = counts
                .iter()
                .map(|&c| c as f64 * if rng.random::<bool>() { 1.0 } else { -1.0 })
                .sum();
            acc += s * s;
        }
        let mc = acc / trials as f64;
        let exact = expected_square(&counts, &[1.0; 4]);
        assert_eq!(exact, 14.0);
        assert!((mc - exact).abs() < 0.2, "{mc}");
    }

    #[test]
    fn bad_sizes_are_rejected() {
        assert!(verify_uniform_optimality(0, 3).is_err());
        assert!(verify_uniform_optimality(13, 3).is_err());
    }
}
