//! Bradley–Terry maximum likelihood with an optional ridge penalty.
//!
//! The penalised log-likelihood is concave, so a damped Newton iteration
//! with backtracking converges from any start. Without the penalty the
//! likelihood is flat along the all-ones direction; the Newton system adds
//! the projector onto that direction, which pins the step to mean zero.

use nalgebra::{DMatrix, DVector};

/// Sufficient statistics of a record set over `n` local model indices:
/// per ordered pair, the number of comparisons and the summed outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSums {
    n: usize,
    /// `counts[i * n + j]`, symmetric.
    counts: Vec<f64>,
    /// `wins[i * n + j]` = Σ r over comparisons oriented as `i` vs `j`.
    wins: Vec<f64>,
}

impl PairSums {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            counts: vec![0.0; n * n],
            wins: vec![0.0; n * n],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Adds one comparison of local `i` against local `j` with outcome `r`.
    pub fn add(&mut self, i: usize, j: usize, r: f64) {
        let n = self.n;
        self.counts[i * n + j] += 1.0;
        self.counts[j * n + i] += 1.0;
        self.wins[i * n + j] += r;
        self.wins[j * n + i] += 1.0 - r;
    }

    pub fn count(&self, i: usize, j: usize) -> f64 {
        self.counts[i * self.n + j]
    }

    pub fn wins(&self, i: usize, j: usize) -> f64 {
        self.wins[i * self.n + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BtOptions {
    pub l2: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for BtOptions {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            tol: 1e-8,
            max_iters: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BtFailure {
    pub last: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
}

/// `ln σ(x)` without overflow.
fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Penalised log-likelihood `Σ [r ln σ(ξa − ξb) + (1 − r) ln σ(ξb − ξa)] − l2/2 ‖ξ‖²`.
pub fn log_likelihood(sums: &PairSums, xi: &[f64], l2: f64) -> f64 {
    let n = sums.n;
    let mut ll = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let c = sums.count(i, j);
            if c == 0.0 {
                continue;
            }
            let w = sums.wins(i, j);
            let d = xi[i] - xi[j];
            ll += w * log_sigmoid(d) + (c - w) * log_sigmoid(-d);
        }
    }
    ll - 0.5 * l2 * xi.iter().map(|x| x * x).sum::<f64>()
}

/// Analytic gradient of [`log_likelihood`].
pub fn gradient(sums: &PairSums, xi: &[f64], l2: f64) -> Vec<f64> {
    let n = sums.n;
    let mut g: Vec<f64> = xi.iter().map(|x| -l2 * x).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let c = sums.count(i, j);
            if c == 0.0 {
                continue;
            }
            let resid = sums.wins(i, j) - c * sigmoid(xi[i] - xi[j]);
            g[i] += resid;
            g[j] -= resid;
        }
    }
    g
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn center(xi: &mut [f64]) {
    if xi.is_empty() {
        return;
    }
    let mean = xi.iter().sum::<f64>() / xi.len() as f64;
    for x in xi.iter_mut() {
        *x -= mean;
    }
}

/// Fits coefficients, returned with mean zero.
pub fn fit(sums: &PairSums, opts: BtOptions, init: Option<&[f64]>) -> Result<Vec<f64>, BtFailure> {
    let n = sums.n;
    let mut xi = match init {
        Some(v) => v.to_vec(),
        None => vec![0.0; n],
    };
    if n == 0 {
        return Ok(xi);
    }
    if opts.l2 == 0.0 {
        center(&mut xi);
    }
    let mut ll = log_likelihood(sums, &xi, opts.l2);
    let mut g = gradient(sums, &xi, opts.l2);
    for iter in 0..opts.max_iters {
        if max_abs(&g) < opts.tol {
            center(&mut xi);
            return Ok(xi);
        }
        let mut h = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            h[(i, i)] += opts.l2;
            for j in (i + 1)..n {
                let c = sums.count(i, j);
                if c == 0.0 {
                    continue;
                }
                let s = sigmoid(xi[i] - xi[j]);
                let w = c * s * (1.0 - s);
                h[(i, i)] += w;
                h[(j, j)] += w;
                h[(i, j)] -= w;
                h[(j, i)] -= w;
            }
        }
        if opts.l2 == 0.0 {
            h.add_scalar_mut(1.0 / n as f64);
        }
        let rhs = DVector::from_column_slice(&g);
        let step = solve(h, &rhs).unwrap_or_else(|| rhs.clone());

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = xi.iter().zip(step.iter()).map(|(x, d)| x + t * d).collect();
            let trial_ll = log_likelihood(sums, &trial, opts.l2);
            // Slack absorbs rounding once the iterate is at the optimum.
            if trial_ll >= ll - 1e-13 * (1.0 + ll.abs()) {
                xi = trial;
                ll = trial_ll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        g = gradient(sums, &xi, opts.l2);
        if !accepted {
            return Err(BtFailure {
                last: xi,
                grad_norm: max_abs(&g),
                iterations: iter + 1,
            });
        }
    }
    if max_abs(&g) < opts.tol {
        center(&mut xi);
        return Ok(xi);
    }
    Err(BtFailure {
        grad_norm: max_abs(&g),
        last: xi,
        iterations: opts.max_iters,
    })
}

fn solve(mut h: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let mut ridge = 0.0;
    for _ in 0..8 {
        if let Some(ch) = h.clone().cholesky() {
            let x = ch.solve(rhs);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        let bump = if ridge == 0.0 { 1e-10 } else { ridge * 100.0 };
        for i in 0..n {
            h[(i, i)] += bump - ridge;
        }
        ridge = bump;
    }
    None
}
