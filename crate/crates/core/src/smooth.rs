//! Backward smoothing: posterior regime marginals and pairwise posteriors
//! given the full observation record.

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::filter::{check_window, FilterResult};
use crate::model::RegimeModel;

/// Posterior regime probabilities given all observations (and the fixed
/// initial regime the filter was conditioned on).
///
/// `gamma[(k, x)] = P(X_{k+1} = x | all observations)` and
/// `xi[(k, xp, x)] = P(X_{k+1} = xp, X_{k+2} = x | all observations)`,
/// so `xi` covers the T-1 regime pairs strictly after the known initial one.
#[derive(Debug, Clone)]
pub struct SmoothResult {
    pub gamma: Array2<f64>,
    pub xi: Array3<f64>,
}

/// Backward recursion over a [`FilterResult`] produced on the same inputs.
///
/// Transitions are re-evaluated at the observed windows, so the recursion is
/// valid when the transition kernel depends on lagged observations.
pub fn backward_smooth<M: RegimeModel>(
    model: &M,
    filter: &FilterResult,
    y_init: &[M::Obs],
    y: &[M::Obs],
) -> Result<SmoothResult> {
    check_window(model, y_init)?;
    let m = model.num_regimes();
    let s = model.order();
    let t = y.len();
    assert_eq!(filter.filtered.nrows(), t, "filter/data length mismatch");

    let mut full: Vec<M::Obs> = Vec::with_capacity(s + t);
    full.extend_from_slice(y_init);
    full.extend_from_slice(y);

    let mut gamma = Array2::zeros((t, m));
    let mut xi = Array3::zeros((t.saturating_sub(1), m, m));

    // Scaled backward variables: beta[k][x] is the conditional density of the
    // future observations given X_{k+1}=x, divided by the filter normalizers,
    // so gamma = filtered * beta without renormalization.
    let mut beta = vec![1.0; m];
    let mut beta_next = vec![0.0; m];
    for x in 0..m {
        gamma[(t - 1, x)] = filter.filtered[(t - 1, x)];
    }

    for k in (1..t).rev() {
        // Step k+1 in 1-based time: window for the transition into step k+1.
        let window = &full[k..k + s];
        let inv_norm = (-filter.log_normalizers[k]).exp();
        let mut emit_beta = vec![0.0; m];
        for x in 0..m {
            let em = model.emission_logpdf(&full[s + k], x, window);
            if em.is_nan() || em == f64::INFINITY {
                return Err(Error::NonFiniteDensity {
                    step: k + 1,
                    what: "emission".into(),
                });
            }
            emit_beta[x] = em.exp() * beta[x];
        }
        for xp in 0..m {
            let mut acc = 0.0;
            for x in 0..m {
                let tr = model.transition_logpdf(x, xp, window);
                if tr.is_nan() || tr == f64::INFINITY {
                    return Err(Error::NonFiniteDensity {
                        step: k + 1,
                        what: "transition".into(),
                    });
                }
                let joint = filter.filtered[(k - 1, xp)] * tr.exp() * emit_beta[x] * inv_norm;
                xi[(k - 1, xp, x)] = joint;
                acc += tr.exp() * emit_beta[x];
            }
            beta_next[xp] = acc * inv_norm;
            gamma[(k - 1, xp)] = filter.filtered[(k - 1, xp)] * beta_next[xp];
        }
        std::mem::swap(&mut beta, &mut beta_next);
    }

    Ok(SmoothResult { gamma, xi })
}
