//! Gaussian linear autoregressions per regime with logistic,
//! observation-driven switching; the threshold (SETAR) limit; stability
//! diagnostics; EM M-steps; and regime-relabeling canonicalization.

mod mstep;
mod setar;
mod stability;

pub use mstep::{
    m_step_ar, m_step_transition, transition_q_grad, transition_q_value, ArMStep, ConstraintMode,
    MStepOutcome, TransitionRow,
};
pub use setar::{fit_setar, setar_transition, SetarFit};
pub use stability::{companion_matrix, stability_check, StabilityReport};

use itertools::Itertools;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{inv_one_plus_exp, normal_logpdf};
use crate::model::{sample_index, RegimeModel, SampleModel};

/// Parameters of an M-regime Gaussian autoregression of order `s` whose
/// regime transitions are logistic functions of the lag-`r` observation.
///
/// Within regime `x`, observations follow
/// `y_k = beta[x][0] + sum_l beta[x][l] * y_{k-l} + sigma[x] * eps_k`.
/// The probability of staying in regime `x` is
/// `pi_minus[x] + (1 - pi_minus[x] - pi_plus[x]) / (1 + exp(lambda0[x] + lambda1[x] * y_{k-r}))`,
/// so it always lies strictly inside `(pi_minus[x], 1 - pi_plus[x])`.
/// For M > 2 the leave mass is split uniformly over the other regimes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianArParams {
    /// Autoregressive order s >= 1.
    pub order: usize,
    /// Transition lag r with 1 <= r <= s.
    pub trans_lag: usize,
    /// Number of regimes M >= 2.
    pub num_regimes: usize,
    /// Per regime: intercept followed by the s AR coefficients.
    pub beta: Vec<Vec<f64>>,
    /// Per regime: innovation standard deviation, > 0.
    pub sigma: Vec<f64>,
    /// Per regime: lower transition floor.
    pub pi_minus: Vec<f64>,
    /// Per regime: upper floor; stay probability stays below 1 - pi_plus.
    pub pi_plus: Vec<f64>,
    /// Per regime: logistic intercept.
    pub lambda0: Vec<f64>,
    /// Per regime: logistic slope on the lag-r observation.
    pub lambda1: Vec<f64>,
}

impl GaussianArParams {
    /// Check the validity constraints: sigma > 0 and
    /// 0 < pi_minus < 1 - pi_plus < 1 per regime, consistent shapes.
    pub fn validate(&self) -> Result<()> {
        let m = self.num_regimes;
        if m < 2 {
            return Err(Error::InvalidParams("need at least two regimes".into()));
        }
        if self.order < 1 {
            return Err(Error::InvalidParams("order must be >= 1".into()));
        }
        if self.trans_lag < 1 || self.trans_lag > self.order {
            return Err(Error::InvalidParams(format!(
                "transition lag {} outside 1..={}",
                self.trans_lag, self.order
            )));
        }
        for (name, len) in [
            ("beta", self.beta.len()),
            ("sigma", self.sigma.len()),
            ("pi_minus", self.pi_minus.len()),
            ("pi_plus", self.pi_plus.len()),
            ("lambda0", self.lambda0.len()),
            ("lambda1", self.lambda1.len()),
        ] {
            if len != m {
                return Err(Error::InvalidParams(format!(
                    "{name} has {len} entries for {m} regimes"
                )));
            }
        }
        for x in 0..m {
            if self.beta[x].len() != self.order + 1 {
                return Err(Error::InvalidParams(format!(
                    "beta[{x}] has {} coefficients for order {}",
                    self.beta[x].len(),
                    self.order
                )));
            }
            if !(self.sigma[x] > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "sigma[{x}] = {} must be positive",
                    self.sigma[x]
                )));
            }
            let (lo, hi) = (self.pi_minus[x], self.pi_plus[x]);
            if !(lo > 0.0 && lo < 1.0 - hi && 1.0 - hi < 1.0) {
                return Err(Error::InvalidParams(format!(
                    "regime {x}: need 0 < pi_minus < 1 - pi_plus < 1, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }

    /// Conditional mean of an observation in regime `x` given the window
    /// (oldest first).
    pub fn conditional_mean(&self, x: usize, window: &[f64]) -> f64 {
        let s = self.order;
        let b = &self.beta[x];
        let mut mean = b[0];
        for l in 1..=s {
            mean += b[l] * window[s - l];
        }
        mean
    }

    /// Gaussian emission log-density in regime `x`.
    pub fn emission_logpdf(&self, y: f64, x: usize, window: &[f64]) -> f64 {
        normal_logpdf(y, self.conditional_mean(x, window), self.sigma[x])
    }

    /// Stay probability and total leave probability in regime `x` given the
    /// lag-r observation. Both are computed directly from the floors so
    /// neither underflows to zero when the logistic saturates.
    pub fn stay_leave(&self, x: usize, y_lag_r: f64) -> (f64, f64) {
        let t = self.lambda0[x] + self.lambda1[x] * y_lag_r;
        let span = 1.0 - self.pi_minus[x] - self.pi_plus[x];
        let g = inv_one_plus_exp(t);
        let g_comp = inv_one_plus_exp(-t);
        (
            self.pi_minus[x] + span * g,
            self.pi_plus[x] + span * g_comp,
        )
    }

    /// Probability of staying in regime `x` given the lag-r observation.
    pub fn stay_prob(&self, x: usize, y_lag_r: f64) -> f64 {
        self.stay_leave(x, y_lag_r).0
    }

    /// Transition probability of `x_next` given `x_prev` and the window.
    pub fn transition_prob(&self, x_next: usize, x_prev: usize, window: &[f64]) -> f64 {
        let lag = window[self.order - self.trans_lag];
        let (stay, leave) = self.stay_leave(x_prev, lag);
        if x_next == x_prev {
            stay
        } else {
            leave / (self.num_regimes as f64 - 1.0)
        }
    }

    /// Uniform bounds on every transition probability the model can produce.
    pub fn transition_bounds(&self) -> (f64, f64) {
        let m = self.num_regimes as f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in 0..self.num_regimes {
            let stay_lo = self.pi_minus[x];
            let stay_hi = 1.0 - self.pi_plus[x];
            lo = lo.min(stay_lo).min((1.0 - stay_hi) / (m - 1.0));
            hi = hi.max(stay_hi).max((1.0 - stay_lo) / (m - 1.0));
        }
        (lo, hi)
    }

    /// Reorder the regimes by `perm`: new regime `i` takes the parameters of
    /// old regime `perm[i]`.
    pub fn permute_regimes(&self, perm: &[usize]) -> GaussianArParams {
        let pick = |v: &Vec<f64>| perm.iter().map(|&p| v[p]).collect();
        GaussianArParams {
            order: self.order,
            trans_lag: self.trans_lag,
            num_regimes: self.num_regimes,
            beta: perm.iter().map(|&p| self.beta[p].clone()).collect(),
            sigma: pick(&self.sigma),
            pi_minus: pick(&self.pi_minus),
            pi_plus: pick(&self.pi_plus),
            lambda0: pick(&self.lambda0),
            lambda1: pick(&self.lambda1),
        }
    }

    /// Flatten to named components, regime-major. Used for bootstrap
    /// percentile intervals and parameter distances.
    pub fn flatten(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for x in 0..self.num_regimes {
            for (l, b) in self.beta[x].iter().enumerate() {
                out.push((format!("beta{l}_{x}"), *b));
            }
            out.push((format!("sigma_{x}"), self.sigma[x]));
            out.push((format!("pi_minus_{x}"), self.pi_minus[x]));
            out.push((format!("pi_plus_{x}"), self.pi_plus[x]));
            out.push((format!("lambda0_{x}"), self.lambda0[x]));
            out.push((format!("lambda1_{x}"), self.lambda1[x]));
        }
        out
    }
}

/// Reorder regimes into a canonical order so parameter vectors that differ
/// only by a relabeling compare equal.
///
/// Sort key: sigma ascending, ties broken by beta components in order.
/// Returns the canonical parameters and the permutation applied (new index
/// `i` holds old regime `perm[i]`).
pub fn canonicalize(params: &GaussianArParams) -> (GaussianArParams, Vec<usize>) {
    let mut perm: Vec<usize> = (0..params.num_regimes).collect();
    perm.sort_by(|&a, &b| {
        let ka = std::iter::once(params.sigma[a]).chain(params.beta[a].iter().cloned());
        let kb = std::iter::once(params.sigma[b]).chain(params.beta[b].iter().cloned());
        ka.partial_cmp(kb).unwrap_or(std::cmp::Ordering::Equal)
    });
    (params.permute_regimes(&perm), perm)
}

/// Smallest max-abs componentwise difference between two parameter vectors
/// over all regime relabelings.
pub fn param_distance(a: &GaussianArParams, b: &GaussianArParams) -> Result<f64> {
    if a.num_regimes != b.num_regimes || a.order != b.order || a.trans_lag != b.trans_lag {
        return Err(Error::ShapeMismatch(format!(
            "(M, s, r) = ({}, {}, {}) vs ({}, {}, {})",
            a.num_regimes, a.order, a.trans_lag, b.num_regimes, b.order, b.trans_lag
        )));
    }
    let fa = a.flatten();
    let best = (0..a.num_regimes)
        .permutations(a.num_regimes)
        .map(|perm| {
            let fb = b.permute_regimes(&perm).flatten();
            fa.iter()
                .zip(&fb)
                .map(|((_, va), (_, vb))| (va - vb).abs())
                .fold(0.0f64, f64::max)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best)
}

impl RegimeModel for GaussianArParams {
    type Obs = f64;

    fn num_regimes(&self) -> usize {
        self.num_regimes
    }

    fn order(&self) -> usize {
        self.order
    }

    fn transition_logpdf(&self, x_next: usize, x_prev: usize, window: &[f64]) -> f64 {
        self.transition_prob(x_next, x_prev, window).ln()
    }

    fn emission_logpdf(&self, y: &f64, x: usize, window: &[f64]) -> f64 {
        GaussianArParams::emission_logpdf(self, *y, x, window)
    }

    fn transition_bounds(&self) -> (f64, f64) {
        GaussianArParams::transition_bounds(self)
    }
}

impl SampleModel for GaussianArParams {
    fn sample_transition<R: Rng + ?Sized>(
        &self,
        x_prev: usize,
        window: &[f64],
        rng: &mut R,
    ) -> usize {
        let probs: Vec<f64> = (0..self.num_regimes)
            .map(|x| self.transition_prob(x, x_prev, window))
            .collect();
        sample_index(&probs, rng)
    }

    fn sample_emission<R: Rng + ?Sized>(&self, x: usize, window: &[f64], rng: &mut R) -> f64 {
        let mean = self.conditional_mean(x, window);
        Normal::new(mean, self.sigma[x]).unwrap().sample(rng)
    }
}
