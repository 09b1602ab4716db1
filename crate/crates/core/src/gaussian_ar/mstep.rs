//! EM M-steps for the Gaussian switching autoregression: exact weighted
//! least squares for the regime dynamics and numeric ascent for the logistic
//! transition parameters.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::spd_solve;
use crate::math::inv_one_plus_exp;
use crate::optim::{maximize, OptimOptions};

/// Identifiability constraint under which the transition parameters are
/// estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConstraintMode {
    /// Slopes bounded away from zero (|lambda1| >= epsilon); floors free.
    ThetaPrime,
    /// Floors pinned to a common fixed constant; intercept and slope free.
    ThetaDoublePrime { pi0: f64 },
    /// Floors pinned and slope pinned to zero: a homogeneous chain whose
    /// single free parameter per regime is the stay level.
    Homogeneous { pi0: f64 },
}

/// Exclusion radius around lambda1 = 0 in [`ConstraintMode::ThetaPrime`].
pub const LAMBDA1_EPSILON: f64 = 1e-6;
/// Clamp on both logistic coefficients during optimization.
pub const LAMBDA_MAX: f64 = 1e3;
/// Clamp on the free floor logits (softmax coordinates).
const PI_LOGIT_MAX: f64 = 35.0;

/// Transition parameters of one regime row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionRow {
    pub pi_minus: f64,
    pub pi_plus: f64,
    pub lambda0: f64,
    pub lambda1: f64,
}

/// Result of a numeric M-step: the parameters and whether they improved the
/// objective over the previous iterate (when they did not, the previous
/// iterate is returned unchanged and `improved` is false).
#[derive(Debug, Clone)]
pub struct MStepOutcome<T> {
    pub params: T,
    pub improved: bool,
}

/// Per-regime output of the autoregression M-step.
#[derive(Debug, Clone)]
pub struct ArMStep {
    /// Intercept followed by AR coefficients, one vector per regime.
    pub beta: Vec<Vec<f64>>,
    /// Innovation standard deviation per regime.
    pub sigma: Vec<f64>,
}

/// Exact maximizer of the Gaussian complete-data term: per regime,
/// gamma-weighted least squares of each observation on
/// `(1, y_{k-1}, …, y_{k-s})`, with the weighted residual variance as the
/// new noise level.
///
/// `gamma` is T x M; `y_init` supplies the `s` conditioning observations.
pub fn m_step_ar(gamma: &Array2<f64>, y_init: &[f64], y: &[f64], order: usize) -> Result<ArMStep> {
    let s = order;
    let t = y.len();
    let m = gamma.ncols();
    assert_eq!(gamma.nrows(), t, "gamma/data length mismatch");
    if y_init.len() != s {
        return Err(Error::DimensionMismatch {
            what: "conditioning window y_init".into(),
            expected: s,
            got: y_init.len(),
        });
    }
    let mut full = Vec::with_capacity(s + t);
    full.extend_from_slice(y_init);
    full.extend_from_slice(y);

    let d = s + 1;
    let mut beta_out = Vec::with_capacity(m);
    let mut sigma_out = Vec::with_capacity(m);
    let mut row = vec![0.0; d];
    for x in 0..m {
        let mut xtx = vec![vec![0.0; d]; d];
        let mut xty = vec![0.0; d];
        let mut wsum = 0.0;
        for k in 0..t {
            let w = gamma[(k, x)];
            row[0] = 1.0;
            for l in 1..=s {
                row[l] = full[k + s - l];
            }
            for i in 0..d {
                for j in 0..d {
                    xtx[i][j] += w * row[i] * row[j];
                }
                xty[i] += w * row[i] * y[k];
            }
            wsum += w;
        }
        let beta = spd_solve(&xtx, &xty, 1e-10).ok_or(Error::SingularDesign { regime: x })?;
        let mut wsse = 0.0;
        for k in 0..t {
            let w = gamma[(k, x)];
            let mut fit = beta[0];
            for l in 1..=s {
                fit += beta[l] * full[k + s - l];
            }
            wsse += w * (y[k] - fit).powi(2);
        }
        beta_out.push(beta);
        sigma_out.push((wsse / wsum).sqrt());
    }
    Ok(ArMStep {
        beta: beta_out,
        sigma: sigma_out,
    })
}

/// Free-coordinate layout for one regime row under a constraint mode.
///
/// ThetaPrime:       [u, v, lambda0, lambda1] with (pi-, pi+) = softmax(u, v)
///                   against a pinned third logit.
/// ThetaDoublePrime: [lambda0, lambda1].
/// Homogeneous:      [lambda0].
fn free_dim(mode: ConstraintMode) -> usize {
    match mode {
        ConstraintMode::ThetaPrime => 4,
        ConstraintMode::ThetaDoublePrime { .. } => 2,
        ConstraintMode::Homogeneous { .. } => 1,
    }
}

fn row_to_free(row: &TransitionRow, mode: ConstraintMode) -> Vec<f64> {
    match mode {
        ConstraintMode::ThetaPrime => {
            let rest = (1.0 - row.pi_minus - row.pi_plus).max(1e-300);
            vec![
                (row.pi_minus / rest).ln(),
                (row.pi_plus / rest).ln(),
                row.lambda0,
                row.lambda1,
            ]
        }
        ConstraintMode::ThetaDoublePrime { .. } => vec![row.lambda0, row.lambda1],
        ConstraintMode::Homogeneous { .. } => vec![row.lambda0],
    }
}

fn free_to_row(free: &[f64], mode: ConstraintMode) -> TransitionRow {
    match mode {
        ConstraintMode::ThetaPrime => {
            let (eu, ev) = (free[0].exp(), free[1].exp());
            let z = 1.0 + eu + ev;
            TransitionRow {
                pi_minus: eu / z,
                pi_plus: ev / z,
                lambda0: free[2],
                lambda1: free[3],
            }
        }
        ConstraintMode::ThetaDoublePrime { pi0 } => TransitionRow {
            pi_minus: pi0,
            pi_plus: pi0,
            lambda0: free[0],
            lambda1: free[1],
        },
        ConstraintMode::Homogeneous { pi0 } => TransitionRow {
            pi_minus: pi0,
            pi_plus: pi0,
            lambda0: free[0],
            lambda1: 0.0,
        },
    }
}

/// Weighted transition objective for one regime row in free coordinates:
/// `sum_k stay_w[k] * log p_stay(cov[k]) + leave_w[k] * log(1 - p_stay(cov[k]))`.
///
/// The uniform split of the leave mass only contributes a constant, so it is
/// omitted. Returns the objective value.
pub fn transition_q_value(
    free: &[f64],
    mode: ConstraintMode,
    stay_w: &[f64],
    leave_w: &[f64],
    cov: &[f64],
) -> f64 {
    let row = free_to_row(free, mode);
    let span = 1.0 - row.pi_minus - row.pi_plus;
    let mut q = 0.0;
    for k in 0..cov.len() {
        let t = row.lambda0 + row.lambda1 * cov[k];
        // Stay and leave each computed from their own floor so neither
        // underflows when the logistic saturates.
        let stay = row.pi_minus + span * inv_one_plus_exp(t);
        let leave = row.pi_plus + span * inv_one_plus_exp(-t);
        q += stay_w[k] * stay.ln() + leave_w[k] * leave.ln();
    }
    q
}

/// Analytic gradient of [`transition_q_value`] in the same free coordinates.
pub fn transition_q_grad(
    free: &[f64],
    mode: ConstraintMode,
    stay_w: &[f64],
    leave_w: &[f64],
    cov: &[f64],
) -> Vec<f64> {
    let row = free_to_row(free, mode);
    let span = 1.0 - row.pi_minus - row.pi_plus;
    // Accumulate the gradient with respect to (pi-, pi+, lambda0, lambda1).
    let mut d_pm = 0.0;
    let mut d_pp = 0.0;
    let mut d_l0 = 0.0;
    let mut d_l1 = 0.0;
    for k in 0..cov.len() {
        let t = row.lambda0 + row.lambda1 * cov[k];
        let g = inv_one_plus_exp(t);
        let g_comp = inv_one_plus_exp(-t);
        let stay = row.pi_minus + span * g;
        let leave = row.pi_plus + span * g_comp;
        let dq_dstay = stay_w[k] / stay - leave_w[k] / leave;
        let dstay_dt = -span * g * g_comp;
        d_pm += dq_dstay * (1.0 - g);
        d_pp += dq_dstay * (-g);
        d_l0 += dq_dstay * dstay_dt;
        d_l1 += dq_dstay * dstay_dt * cov[k];
    }
    match mode {
        ConstraintMode::ThetaPrime => {
            // Chain through the softmax (u, v) -> (pi-, pi+).
            let (pm, pp) = (row.pi_minus, row.pi_plus);
            vec![
                d_pm * pm * (1.0 - pm) + d_pp * (-pm * pp),
                d_pm * (-pm * pp) + d_pp * pp * (1.0 - pp),
                d_l0,
                d_l1,
            ]
        }
        ConstraintMode::ThetaDoublePrime { .. } => vec![d_l0, d_l1],
        ConstraintMode::Homogeneous { .. } => vec![d_l0],
    }
}

fn bounds(mode: ConstraintMode) -> (Vec<f64>, Vec<f64>) {
    match mode {
        ConstraintMode::ThetaPrime => (
            vec![-PI_LOGIT_MAX, -PI_LOGIT_MAX, -LAMBDA_MAX, -LAMBDA_MAX],
            vec![PI_LOGIT_MAX, PI_LOGIT_MAX, LAMBDA_MAX, LAMBDA_MAX],
        ),
        ConstraintMode::ThetaDoublePrime { .. } => {
            (vec![-LAMBDA_MAX, -LAMBDA_MAX], vec![LAMBDA_MAX, LAMBDA_MAX])
        }
        ConstraintMode::Homogeneous { .. } => (vec![-LAMBDA_MAX], vec![LAMBDA_MAX]),
    }
}

/// Numeric maximizer of the transition term of the complete-data objective.
///
/// `xi[k]` is the M x M matrix of pairwise posterior weights for transition
/// step k and `cov[k]` the lag-r observation steering that step. Each regime
/// row is optimized independently by multi-start BFGS from the previous
/// iterate plus perturbations; the previous iterate is kept whenever nothing
/// improves on it.
pub fn m_step_transition(
    xi: &[Array2<f64>],
    cov: &[f64],
    mode: ConstraintMode,
    prev: &[TransitionRow],
) -> MStepOutcome<Vec<TransitionRow>> {
    assert_eq!(xi.len(), cov.len(), "xi/covariate length mismatch");
    let m = prev.len();
    let t = xi.len();
    let mut rows = Vec::with_capacity(m);
    let mut any_improved = false;

    for x in 0..m {
        let mut stay_w = Vec::with_capacity(t);
        let mut leave_w = Vec::with_capacity(t);
        for k in 0..t {
            let mat = &xi[k];
            let stay = mat[(x, x)];
            let total: f64 = (0..m).map(|xn| mat[(x, xn)]).sum();
            stay_w.push(stay);
            leave_w.push(total - stay);
        }

        let dim = free_dim(mode);
        let (lower, upper) = bounds(mode);
        let mut opts = OptimOptions::unbounded(dim);
        opts.lower = lower;
        opts.upper = upper;
        opts.max_iters = 150;
        opts.grad_tol = 1e-9;
        opts.f_tol = 1e-12;

        let f = |p: &[f64], g: Option<&mut [f64]>| {
            if let Some(g) = g {
                g.copy_from_slice(&transition_q_grad(p, mode, &stay_w, &leave_w, cov));
            }
            transition_q_value(p, mode, &stay_w, &leave_w, cov)
        };

        let start = row_to_free(&prev[x], mode);
        let grad_start = transition_q_grad(&start, mode, &stay_w, &leave_w, cov);
        let q_prev = transition_q_value(&start, mode, &stay_w, &leave_w, cov);
        let q_scale = 1.0 + q_prev.abs();
        let grad_norm = grad_start.iter().cloned().fold(0.0f64, |a, g| a.max(g.abs()));

        let mut best_free = start.clone();
        let mut best_q = q_prev;
        let try_candidate = |cand: &[f64], best_q: &mut f64, best_free: &mut Vec<f64>| {
            let (xf, qf) = maximize(&f, cand, &opts);
            if qf.is_finite() && qf > *best_q {
                *best_q = qf;
                *best_free = xf;
            }
        };

        // Warm start from the previous iterate (skipped when it is already
        // stationary), plus a closed-form seed in the constant-stay mode.
        if grad_norm > 1e-8 * q_scale {
            try_candidate(&start.clone(), &mut best_q, &mut best_free);
        }
        if let ConstraintMode::Homogeneous { pi0 } = mode {
            // The optimal constant stay probability is the weight ratio,
            // clamped into the attainable interval.
            let s_tot: f64 = stay_w.iter().sum();
            let l_tot: f64 = leave_w.iter().sum();
            if s_tot + l_tot > 0.0 {
                let span = 1.0 - 2.0 * pi0;
                let g_target =
                    (((s_tot / (s_tot + l_tot)) - pi0) / span).clamp(1e-12, 1.0 - 1e-12);
                let seed = vec![(1.0 / g_target - 1.0).ln()];
                try_candidate(&seed, &mut best_q, &mut best_free);
            }
        }
        // Perturbed restarts only when the warm start is stuck away from a
        // stationary point.
        if best_q - q_prev <= 1e-10 * q_scale && grad_norm > 1e-8 * q_scale {
            let mut candidates: Vec<Vec<f64>> = Vec::new();
            for scale in [0.5, 2.0, -1.0] {
                candidates.push(start.iter().map(|v| v * scale).collect());
            }
            for shift in [1.0, -1.0] {
                candidates.push(start.iter().map(|v| v + shift).collect());
            }
            for cand in candidates {
                try_candidate(&cand, &mut best_q, &mut best_free);
            }
        }

        if best_q > q_prev {
            any_improved = true;
            let mut row = free_to_row(&best_free, mode);
            if mode == ConstraintMode::ThetaPrime && row.lambda1.abs() < LAMBDA1_EPSILON {
                // Snap to whichever side of the exclusion radius scores better.
                let mut plus = best_free.clone();
                plus[3] = LAMBDA1_EPSILON;
                let mut minus = best_free.clone();
                minus[3] = -LAMBDA1_EPSILON;
                let qp = transition_q_value(&plus, mode, &stay_w, &leave_w, cov);
                let qm = transition_q_value(&minus, mode, &stay_w, &leave_w, cov);
                row = free_to_row(if qp >= qm { &plus } else { &minus }, mode);
            }
            rows.push(row);
        } else {
            rows.push(prev[x]);
        }
    }

    MStepOutcome {
        params: rows,
        improved: any_improved,
    }
}
