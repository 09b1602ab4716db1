//! Forward filtering, exact path-enumeration likelihood, and the
//! initial-condition forgetting diagnostic.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::math::{log_sum_exp, tv_distance};
use crate::model::RegimeModel;

/// Output of the forward filter.
///
/// `filtered` row k is the conditional regime distribution
/// P(X_{k+1} = · | X_0 = x0, observations through step k+1); rows sum to 1.
/// `log_normalizers[k]` is the log conditional density of observation k+1
/// given its past, so their sum is the conditional log-likelihood.
#[derive(Debug, Clone)]
pub struct FilterResult {
    pub filtered: Array2<f64>,
    pub log_normalizers: Vec<f64>,
    pub log_likelihood: f64,
}

/// Filter-forgetting diagnostic: total-variation distances between two
/// filters started from different initial regimes, with the geometric bound
/// implied by the model's uniform transition bounds.
#[derive(Debug, Clone)]
pub struct ForgettingResult {
    /// d_k = TV(filter from x0a, filter from x0b) at each step.
    pub tv: Vec<f64>,
    /// rho = 1 - lower/upper from the model's transition bounds.
    pub rho: f64,
    /// The bound sequence rho^k, k = 1..T.
    pub bound: Vec<f64>,
}

pub(crate) fn check_window<M: RegimeModel>(model: &M, y_init: &[M::Obs]) -> Result<()> {
    let s = model.order();
    if y_init.len() != s {
        return Err(Error::DimensionMismatch {
            what: "conditioning window y_init".into(),
            expected: s,
            got: y_init.len(),
        });
    }
    Ok(())
}

fn check_density(v: f64, step: usize, what: &str) -> Result<f64> {
    if v.is_nan() || v == f64::INFINITY {
        return Err(Error::NonFiniteDensity {
            step,
            what: what.into(),
        });
    }
    Ok(v)
}

/// Run the scaled forward algorithm conditionally on `X_0 = x0` and the
/// `s` observations in `y_init`.
///
/// All arithmetic is in natural-log space with a log-sum-exp reduction and
/// per-step renormalization, so long series do not underflow. The first
/// `s` observations only condition; they contribute no emission terms.
pub fn forward_filter<M: RegimeModel>(
    model: &M,
    x0: usize,
    y_init: &[M::Obs],
    y: &[M::Obs],
) -> Result<FilterResult> {
    check_window(model, y_init)?;
    let m = model.num_regimes();
    let s = model.order();
    let t = y.len();
    assert!(t >= 1, "observation sequence must be non-empty");
    assert!(x0 < m, "initial regime out of range");

    let mut full: Vec<M::Obs> = Vec::with_capacity(s + t);
    full.extend_from_slice(y_init);
    full.extend_from_slice(y);

    let mut filtered = Array2::zeros((t, m));
    let mut log_normalizers = Vec::with_capacity(t);
    // log filtered probabilities of the previous step; the initial regime is known.
    let mut log_prev = vec![f64::NEG_INFINITY; m];
    log_prev[x0] = 0.0;

    let mut log_pred = vec![0.0; m];
    let mut scratch = vec![0.0; m];
    for k in 0..t {
        let window = &full[k..k + s];
        for x_next in 0..m {
            for (x_prev, sc) in scratch.iter_mut().enumerate() {
                let lp = if log_prev[x_prev] == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    let tr = check_density(
                        model.transition_logpdf(x_next, x_prev, window),
                        k + 1,
                        "transition",
                    )?;
                    log_prev[x_prev] + tr
                };
                *sc = lp;
            }
            let em = check_density(
                model.emission_logpdf(&full[s + k], x_next, window),
                k + 1,
                "emission",
            )?;
            log_pred[x_next] = log_sum_exp(&scratch) + em;
        }
        let c = log_sum_exp(&log_pred);
        if c == f64::NEG_INFINITY {
            return Err(Error::DegenerateStep { step: k + 1 });
        }
        for x in 0..m {
            log_prev[x] = log_pred[x] - c;
            filtered[(k, x)] = log_prev[x].exp();
        }
        log_normalizers.push(c);
    }

    let log_likelihood = log_normalizers.iter().sum();
    Ok(FilterResult {
        filtered,
        log_normalizers,
        log_likelihood,
    })
}

/// Exact log-likelihood by explicit summation over all M^T regime paths.
///
/// Deliberately shares nothing with [`forward_filter`]: each path's joint
/// log-density is accumulated term by term and paths are combined with a
/// single log-sum-exp, so this can serve as an independent cross-check.
pub fn brute_force_loglik<M: RegimeModel>(
    model: &M,
    x0: usize,
    y_init: &[M::Obs],
    y: &[M::Obs],
) -> Result<f64> {
    const MAX_PATHS: u64 = 1_000_000;
    check_window(model, y_init)?;
    let m = model.num_regimes();
    let s = model.order();
    let t = y.len();
    let n_paths = (m as u64).checked_pow(t as u32).filter(|&n| n <= MAX_PATHS);
    let n_paths = n_paths.ok_or(Error::TooLarge {
        regimes: m,
        steps: t,
        max: MAX_PATHS,
    })?;

    let mut full: Vec<M::Obs> = Vec::with_capacity(s + t);
    full.extend_from_slice(y_init);
    full.extend_from_slice(y);

    let mut path = vec![0usize; t];
    let mut log_terms = Vec::with_capacity(n_paths as usize);
    for idx in 0..n_paths {
        let mut rem = idx;
        for slot in path.iter_mut() {
            *slot = (rem % m as u64) as usize;
            rem /= m as u64;
        }
        let mut lp = 0.0;
        let mut prev = x0;
        for (k, &xk) in path.iter().enumerate() {
            let window = &full[k..k + s];
            lp += check_density(model.transition_logpdf(xk, prev, window), k + 1, "transition")?;
            lp += check_density(
                model.emission_logpdf(&full[s + k], xk, window),
                k + 1,
                "emission",
            )?;
            prev = xk;
        }
        log_terms.push(lp);
    }
    Ok(log_sum_exp(&log_terms))
}

/// Track how quickly two filters started from different initial regimes merge.
///
/// Returns per-step total-variation distances together with the geometric
/// envelope rho^k, rho = 1 - lower/upper from [`RegimeModel::transition_bounds`].
pub fn filter_forgetting<M: RegimeModel>(
    model: &M,
    y_init: &[M::Obs],
    y: &[M::Obs],
    x0a: usize,
    x0b: usize,
) -> Result<ForgettingResult> {
    let fa = forward_filter(model, x0a, y_init, y)?;
    let fb = forward_filter(model, x0b, y_init, y)?;
    let tv: Vec<f64> = fa
        .filtered
        .rows()
        .into_iter()
        .zip(fb.filtered.rows())
        .map(|(ra, rb)| tv_distance(ra.as_slice().unwrap(), rb.as_slice().unwrap()))
        .collect();
    let (lo, hi) = model.transition_bounds();
    let rho = 1.0 - lo / hi;
    let bound = (1..=tv.len()).map(|k| rho.powi(k as i32)).collect();
    Ok(ForgettingResult { tv, rho, bound })
}

/// Extremes of the transition density actually attained over the windows of a
/// given data set: a data-driven `(lower, upper)` pair that sharpens the
/// model's uniform bounds for the forgetting envelope.
pub fn attained_transition_bounds<M: RegimeModel>(
    model: &M,
    y_init: &[M::Obs],
    y: &[M::Obs],
) -> Result<(f64, f64)> {
    check_window(model, y_init)?;
    let m = model.num_regimes();
    let s = model.order();
    let mut full: Vec<M::Obs> = Vec::with_capacity(s + y.len());
    full.extend_from_slice(y_init);
    full.extend_from_slice(y);

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..y.len() {
        let window = &full[k..k + s];
        for x_prev in 0..m {
            for x_next in 0..m {
                let p = model.transition_logpdf(x_next, x_prev, window).exp();
                lo = lo.min(p);
                hi = hi.max(p);
            }
        }
    }
    Ok((lo, hi))
}
