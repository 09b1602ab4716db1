//! EM M-steps for the precipitation model: weighted Bernoulli-Gamma
//! maximum likelihood per station and numeric ascent for the kernel
//! transition weights.

use ndarray::{Array1, Array2};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve};
use crate::math::{log_sum_exp, trigamma};
use crate::optim::{maximize, OptimOptions};

/// One source-regime row of the kernel transition parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRow {
    /// Baseline weights, positive, summing to 1.
    pub q: Vec<f64>,
    /// Kernel centers, one vector per destination regime, summing to zero
    /// componentwise.
    pub mu: Vec<Vec<f64>>,
}

/// Weighted maximum likelihood for one station's zero-inflated Gamma law.
///
/// `weights[k]` is the posterior weight of the regime being updated at
/// observation k. The wet probability is the weighted wet fraction; the
/// Gamma shape solves `log(alpha) - digamma(alpha) = log(wmean) - wmeanlog`
/// by Newton iteration from a moment-based start, and the rate is
/// `alpha / wmean`. When no wet observation carries weight the previous
/// shape and rate are returned unchanged alongside the updated wet
/// probability.
pub fn m_step_gamma(
    weights: &[f64],
    rain: &[f64],
    prev_alpha: f64,
    prev_beta: f64,
) -> Result<(f64, f64, f64)> {
    assert_eq!(weights.len(), rain.len(), "weights/rain length mismatch");
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidParams("weights sum to zero".into()));
    }
    let wet_weight: f64 = weights
        .iter()
        .zip(rain)
        .filter(|(_, &r)| r > 0.0)
        .map(|(&w, _)| w)
        .sum();
    let pi = wet_weight / total;
    if wet_weight <= 0.0 {
        return Ok((pi, prev_alpha, prev_beta));
    }

    let mut mean = 0.0;
    let mut mean_log = 0.0;
    for (&w, &r) in weights.iter().zip(rain) {
        if r > 0.0 {
            mean += w * r;
            mean_log += w * r.ln();
        }
    }
    mean /= wet_weight;
    mean_log /= wet_weight;
    let delta = mean.ln() - mean_log;
    if !(delta > 0.0) {
        // All weighted wet values identical: the likelihood is maximized in
        // the degenerate large-shape limit; report divergence.
        return Err(Error::NewtonDiverged { iters: 0 });
    }

    // Moment-based starting value for the shape.
    let mut alpha = (3.0 - delta + ((delta - 3.0).powi(2) + 24.0 * delta).sqrt()) / (12.0 * delta);
    let mut converged = false;
    for _ in 0..100 {
        let f = alpha.ln() - digamma(alpha) - delta;
        let fp = 1.0 / alpha - trigamma(alpha);
        let mut next = alpha - f / fp;
        if !next.is_finite() || next <= 0.0 {
            next = alpha / 2.0;
        }
        if (next - alpha).abs() <= 1e-12 * alpha.max(1.0) {
            alpha = next;
            converged = true;
            break;
        }
        alpha = next;
    }
    if !converged {
        return Err(Error::NewtonDiverged { iters: 100 });
    }
    Ok((pi, alpha, alpha / mean))
}

/// Weighted Gamma log-likelihood over the wet observations, used by the
/// update above and by grid-search cross-checks.
pub fn weighted_gamma_loglik(weights: &[f64], rain: &[f64], alpha: f64, beta: f64) -> f64 {
    let mut ll = 0.0;
    for (&w, &r) in weights.iter().zip(rain) {
        if r > 0.0 {
            ll += w * ((alpha - 1.0) * r.ln() + alpha * beta.ln() - beta * r - ln_gamma(alpha));
        }
    }
    ll
}

/// Free-coordinate layout of one kernel row with M destinations and
/// m-dimensional centers: M-1 free weight logits (first pinned to zero)
/// followed by the M free center vectors.
fn kernel_dim(m_regimes: usize, cov_dim: usize) -> usize {
    (m_regimes - 1) + m_regimes * cov_dim
}

fn kernel_row_to_free(row: &KernelRow, cov_dim: usize) -> Vec<f64> {
    let m = row.q.len();
    let mut free = Vec::with_capacity(kernel_dim(m, cov_dim));
    for x2 in 1..m {
        free.push((row.q[x2] / row.q[0]).ln());
    }
    for mu in &row.mu {
        free.extend_from_slice(mu);
    }
    free
}

fn kernel_free_to_row(free: &[f64], m: usize, cov_dim: usize) -> KernelRow {
    let mut logits = Vec::with_capacity(m);
    logits.push(0.0);
    logits.extend_from_slice(&free[..m - 1]);
    let norm = log_sum_exp(&logits);
    let q: Vec<f64> = logits.iter().map(|l| (l - norm).exp()).collect();
    let mu: Vec<Vec<f64>> = (0..m)
        .map(|x2| {
            let start = (m - 1) + x2 * cov_dim;
            free[start..start + cov_dim].to_vec()
        })
        .collect();
    KernelRow { q, mu }
}

/// Transition objective of one source regime in free coordinates:
/// `sum_k sum_{x'} xi[k][x'] * log p(x' | x, z[k])` with the Gaussian-kernel
/// weights. `sigma_chol` is the Cholesky factor of the kernel covariance.
pub fn kernel_q_value(
    free: &[f64],
    xi_row: &[Vec<f64>],
    z: &[Array1<f64>],
    sigma_chol: &[Vec<f64>],
) -> f64 {
    let m = xi_row[0].len();
    let d = z[0].len();
    let row = kernel_free_to_row(free, m, d);
    let mut q_val = 0.0;
    let mut scores = vec![0.0; m];
    for (k, zk) in z.iter().enumerate() {
        for x2 in 0..m {
            let diff: Vec<f64> = (0..d).map(|j| zk[j] - row.mu[x2][j]).collect();
            let w = cholesky_solve(sigma_chol, &diff);
            let quad: f64 = diff.iter().zip(&w).map(|(a, b)| a * b).sum();
            scores[x2] = row.q[x2].ln() - 0.5 * quad;
        }
        let norm = log_sum_exp(&scores);
        for x2 in 0..m {
            q_val += xi_row[k][x2] * (scores[x2] - norm);
        }
    }
    q_val
}

/// Analytic gradient of [`kernel_q_value`] in the same free coordinates.
pub fn kernel_q_grad(
    free: &[f64],
    xi_row: &[Vec<f64>],
    z: &[Array1<f64>],
    sigma_chol: &[Vec<f64>],
) -> Vec<f64> {
    let m = xi_row[0].len();
    let d = z[0].len();
    let row = kernel_free_to_row(free, m, d);
    let mut grad = vec![0.0; kernel_dim(m, d)];
    let mut scores = vec![0.0; m];
    let mut sinv_diff: Vec<Vec<f64>> = vec![vec![0.0; d]; m];
    for (k, zk) in z.iter().enumerate() {
        for x2 in 0..m {
            let diff: Vec<f64> = (0..d).map(|j| zk[j] - row.mu[x2][j]).collect();
            let w = cholesky_solve(sigma_chol, &diff);
            let quad: f64 = diff.iter().zip(&w).map(|(a, b)| a * b).sum();
            scores[x2] = row.q[x2].ln() - 0.5 * quad;
            sinv_diff[x2] = w;
        }
        let norm = log_sum_exp(&scores);
        let total_k: f64 = xi_row[k].iter().sum();
        for x2 in 0..m {
            let p = (scores[x2] - norm).exp();
            let resid = xi_row[k][x2] - total_k * p;
            // d(score)/d(logit_j) = [j == x2] - q_j handled via softmax chain
            // below; d(score)/d(mu_{x2}) = Sigma^{-1}(z - mu_{x2}).
            if x2 >= 1 {
                grad[x2 - 1] += resid;
            }
            let start = (m - 1) + x2 * d;
            for j in 0..d {
                grad[start + j] += resid * sinv_diff[x2][j];
            }
        }
    }
    grad
}

/// Recentre the kernel centers to row-sum zero with the compensating
/// rebalance of the baseline weights, which leaves every transition
/// probability unchanged.
fn normalize_row(row: &mut KernelRow, sigma_chol: &[Vec<f64>]) {
    let m = row.q.len();
    let d = row.mu[0].len();
    let mut mean = vec![0.0; d];
    for mu in &row.mu {
        for j in 0..d {
            mean[j] += mu[j] / m as f64;
        }
    }
    let sinv_mean = cholesky_solve(sigma_chol, &mean);
    let mut new_q = vec![0.0; m];
    for x2 in 0..m {
        let dot: f64 = (0..d).map(|j| row.mu[x2][j] * sinv_mean[j]).sum();
        // q -> q * exp(-mu' S^{-1} mean) keeps q * kernel proportional
        // after mu -> mu - mean; the renormalization absorbs the rest.
        new_q[x2] = row.q[x2] * (-dot).exp();
        for j in 0..d {
            row.mu[x2][j] -= mean[j];
        }
    }
    let total: f64 = new_q.iter().sum();
    for x2 in 0..m {
        row.q[x2] = new_q[x2] / total;
    }
    // Force the constraints to hold exactly against rounding residue.
    for j in 0..d {
        let resid: f64 = row.mu.iter().map(|mu| mu[j]).sum::<f64>() / m as f64;
        for mu in row.mu.iter_mut() {
            mu[j] -= resid;
        }
    }
    let total: f64 = row.q.iter().sum();
    for v in row.q.iter_mut() {
        *v /= total;
    }
}

/// Numeric maximizer of the kernel transition term.
///
/// `xi[k]` is the M x M matrix of pairwise posterior weights for transition
/// step k and `z[k]` the covariate steering it. Each source-regime row is
/// optimized independently via BFGS from the previous iterate plus
/// perturbations; rows that fail to improve keep the previous iterate. The
/// returned rows satisfy both row constraints exactly.
pub fn m_step_kernel(
    xi: &[Array2<f64>],
    z: &[Array1<f64>],
    sigma_mat: &Array2<f64>,
    prev: &[KernelRow],
) -> Result<MStepKernelOutcome> {
    assert_eq!(xi.len(), z.len(), "xi/covariate length mismatch");
    let m = prev.len();
    let d = z[0].len();
    let a: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| sigma_mat[(i, j)]).collect())
        .collect();
    let chol = cholesky(&a).ok_or(Error::SingularSigma)?;

    let mut rows = Vec::with_capacity(m);
    let mut any_improved = false;
    for x in 0..m {
        let xi_row: Vec<Vec<f64>> = xi
            .iter()
            .map(|mat| (0..m).map(|x2| mat[(x, x2)]).collect())
            .collect();
        let f = |p: &[f64], g: Option<&mut [f64]>| {
            if let Some(g) = g {
                g.copy_from_slice(&kernel_q_grad(p, &xi_row, z, &chol));
            }
            kernel_q_value(p, &xi_row, z, &chol)
        };
        let start = kernel_row_to_free(&prev[x], d);
        let q_prev = kernel_q_value(&start, &xi_row, z, &chol);

        let mut opts = OptimOptions::unbounded(kernel_dim(m, d));
        opts.lower = vec![-200.0; kernel_dim(m, d)];
        opts.upper = vec![200.0; kernel_dim(m, d)];
        opts.max_iters = 300;
        opts.grad_tol = 1e-10;
        opts.f_tol = 1e-14;

        let mut candidates = vec![start.clone()];
        for scale in [0.5, 2.0] {
            candidates.push(start.iter().map(|v| v * scale).collect());
        }
        candidates.push(start.iter().map(|v| v + 0.5).collect());

        let mut best_free = start.clone();
        let mut best_q = q_prev;
        for cand in candidates {
            let (xf, qf) = maximize(f, &cand, &opts);
            if qf.is_finite() && qf > best_q {
                best_q = qf;
                best_free = xf;
            }
        }

        if best_q > q_prev {
            any_improved = true;
            let mut row = kernel_free_to_row(&best_free, m, d);
            normalize_row(&mut row, &chol);
            rows.push(row);
        } else {
            let mut row = prev[x].clone();
            normalize_row(&mut row, &chol);
            rows.push(row);
        }
    }
    Ok(MStepKernelOutcome {
        rows,
        improved: any_improved,
    })
}

/// Output of [`m_step_kernel`].
#[derive(Debug, Clone)]
pub struct MStepKernelOutcome {
    pub rows: Vec<KernelRow>,
    pub improved: bool,
}
