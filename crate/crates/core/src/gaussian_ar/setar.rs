//! The two-regime threshold autoregression: the deterministic limit of the
//! logistic switching model, plus conditional least-squares fitting with a
//! profiled threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spd_solve;
use crate::math::normal_logpdf;

/// Indicator transition of the two-regime threshold model: regime 0 when
/// the lag-`r` observation is at or below the threshold, regime 1 above.
///
/// `window` is oldest first with length `s`, as everywhere else.
pub fn setar_transition(threshold: f64, x_next: usize, window: &[f64], r: usize) -> f64 {
    let lag = window[window.len() - r];
    let low = lag <= threshold;
    match (x_next, low) {
        (0, true) | (1, false) => 1.0,
        _ => 0.0,
    }
}

/// A fitted two-regime threshold autoregression.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetarFit {
    pub order: usize,
    pub trans_lag: usize,
    pub threshold: f64,
    /// Per regime: intercept followed by AR coefficients.
    pub beta: Vec<Vec<f64>>,
    /// Per regime: residual standard deviation (ML convention).
    pub sigma: Vec<f64>,
    /// Gaussian conditional log-likelihood of the fit.
    pub log_likelihood: f64,
    /// Threshold + per-regime coefficients and scales.
    pub npar: usize,
    /// Observations entering the likelihood.
    pub n_obs: usize,
}

/// Fit a two-regime threshold autoregression by conditional least squares,
/// profiling the threshold over the observed lag-`r` values.
///
/// Candidate thresholds are the distinct lagged values, trimmed so each
/// regime keeps at least `max(s + 2, 10% of T)` observations. For each
/// candidate the regimes are assigned deterministically, each regime gets an
/// ordinary least-squares fit, and the candidate with the highest Gaussian
/// log-likelihood wins.
pub fn fit_setar(y_init: &[f64], y: &[f64], order: usize, trans_lag: usize) -> Result<SetarFit> {
    let s = order;
    if y_init.len() != s {
        return Err(Error::DimensionMismatch {
            what: "conditioning window y_init".into(),
            expected: s,
            got: y_init.len(),
        });
    }
    let t = y.len();
    let mut full = Vec::with_capacity(s + t);
    full.extend_from_slice(y_init);
    full.extend_from_slice(y);

    // Lag value steering each step's regime.
    let lags: Vec<f64> = (0..t).map(|k| full[k + s - trans_lag]).collect();
    let mut candidates = lags.clone();
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    candidates.dedup();
    // Long series: profile over ~an eighth of the distinct lag values,
    // evenly spaced by rank, instead of all of them.
    const MAX_CANDIDATES: usize = 512;
    if candidates.len() > MAX_CANDIDATES {
        let stride = candidates.len() as f64 / MAX_CANDIDATES as f64;
        candidates = (0..MAX_CANDIDATES)
            .map(|i| candidates[(i as f64 * stride) as usize])
            .collect();
    }
    let min_per_regime = (s + 2).max(t / 10);

    let mut best: Option<SetarFit> = None;
    for &c in &candidates {
        let low: Vec<usize> = (0..t).filter(|&k| lags[k] <= c).collect();
        let high: Vec<usize> = (0..t).filter(|&k| lags[k] > c).collect();
        if low.len() < min_per_regime || high.len() < min_per_regime {
            continue;
        }
        let mut beta = Vec::with_capacity(2);
        let mut sigma = Vec::with_capacity(2);
        let mut loglik = 0.0;
        let mut ok = true;
        for idx in [&low, &high] {
            match ols(&full, y, idx, s) {
                Some((b, sd, ll)) => {
                    beta.push(b);
                    sigma.push(sd);
                    loglik += ll;
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        if best.as_ref().map_or(true, |b| loglik > b.log_likelihood) {
            best = Some(SetarFit {
                order: s,
                trans_lag,
                threshold: c,
                beta,
                sigma,
                log_likelihood: loglik,
                npar: 2 * (s + 2) + 1,
                n_obs: t,
            });
        }
    }
    best.ok_or_else(|| Error::InvalidParams("no admissible threshold candidate".into()))
}

fn ols(full: &[f64], y: &[f64], idx: &[usize], s: usize) -> Option<(Vec<f64>, f64, f64)> {
    let d = s + 1;
    let mut xtx = vec![vec![0.0; d]; d];
    let mut xty = vec![0.0; d];
    let design = |k: usize| -> Vec<f64> {
        let mut row = Vec::with_capacity(d);
        row.push(1.0);
        for l in 1..=s {
            row.push(full[k + s - l]);
        }
        row
    };
    for &k in idx {
        let row = design(k);
        for i in 0..d {
            for j in 0..d {
                xtx[i][j] += row[i] * row[j];
            }
            xty[i] += row[i] * y[k];
        }
    }
    let beta = spd_solve(&xtx, &xty, 1e-10)?;
    let mut sse = 0.0;
    for &k in idx {
        let row = design(k);
        let fit: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
        sse += (y[k] - fit).powi(2);
    }
    let n = idx.len() as f64;
    let sd = (sse / n).sqrt();
    if sd <= 0.0 {
        return None;
    }
    let ll: f64 = idx
        .iter()
        .map(|&k| {
            let row = design(k);
            let fit: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            normal_logpdf(y[k], fit, sd)
        })
        .sum();
    Some((beta, sd, ll))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn indicator_respects_threshold_with_ties_low() {
        // r = 2, so the lag value is window[0].
        assert_eq!(setar_transition(3.15, 0, &[3.0, 9.9], 2), 1.0);
        assert_eq!(setar_transition(3.15, 1, &[3.0, 9.9], 2), 0.0);
        // Boundary goes to the low regime.
        assert_eq!(setar_transition(3.15, 0, &[3.15, 9.9], 2), 1.0);
        assert_eq!(setar_transition(3.15, 0, &[4.0, 9.9], 2), 0.0);
        assert_eq!(setar_transition(3.15, 1, &[4.0, 9.9], 2), 1.0);
    }

    #[test]
    fn recovers_a_noiseless_threshold_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let threshold = 0.0;
        let mut full = vec![0.3, -0.2];
        for k in 0..400 {
            let prev = full[k + 1];
            let lag = full[k]; // r = 2
            let next = if lag <= threshold {
                0.2 + 0.5 * prev
            } else {
                -0.3 + 0.8 * prev
            } + 0.01 * rng.gen::<f64>();
            full.push(next);
        }
        let fit = fit_setar(&full[..2], &full[2..], 2, 2).unwrap();
        assert!(fit.threshold.abs() < 0.2, "threshold {}", fit.threshold);
        assert_abs_diff_eq!(fit.beta[0][1], 0.5, epsilon = 0.05);
        assert_abs_diff_eq!(fit.beta[1][1], 0.8, epsilon = 0.05);
        assert_eq!(fit.npar, 9);
    }
}
