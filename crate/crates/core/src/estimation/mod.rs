//! EM estimation: the generic driver with multi-start, information-criterion
//! model comparison, parametric-bootstrap intervals, and a simulation-based
//! consistency experiment.

mod bootstrap;
mod consistency;
mod families;

pub use bootstrap::{parametric_bootstrap, BootstrapReport};
pub use consistency::{consistency_experiment, ConsistencyCell};
pub use families::{GaussianArEm, RainfallEm};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which observation count enters the BIC penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BicConvention {
    /// The observations entering the conditional likelihood (series length
    /// minus the conditioning window). The default.
    Conditional,
    /// The full series length including the conditioning window.
    Total,
}

/// Stopping rules and conventions for the EM driver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop when one iteration improves the log-likelihood by less than this.
    pub tol: f64,
    pub bic_n: BicConvention,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_iters: 500,
            tol: 1e-8,
            bic_n: BicConvention::Conditional,
        }
    }
}

/// A parametric family bound to a data set, ready for EM.
///
/// Implementations own the data and the structural configuration (orders,
/// constraint modes); parameters flow through the methods.
pub trait EmModel: Sync {
    type Params: Clone + Send + Sync;

    /// Conditional log-likelihood of the data at `params`.
    fn loglik(&self, params: &Self::Params) -> Result<f64>;

    /// One EM sweep: the log-likelihood at `params` and the updated
    /// parameters from the exact or numeric M-steps.
    fn em_iterate(&self, params: &Self::Params) -> Result<(f64, Self::Params)>;

    /// Free parameter count under the family's constraint mode.
    fn npar(&self) -> usize;

    /// Observations entering the conditional likelihood.
    fn n_obs(&self) -> usize;

    /// Observations used only as conditioning values.
    fn n_conditioning(&self) -> usize;

    /// Whether a converged parameter vector is a usable optimum (rejects
    /// degenerate spikes such as a regime variance collapsing onto a floor).
    fn accept(&self, params: &Self::Params) -> bool;

    /// Deterministic data-driven starting point.
    fn moment_start(&self) -> Result<Self::Params>;

    /// Randomized perturbation of a base parameter vector.
    fn perturb(&self, base: &Self::Params, rng: &mut ChaCha8Rng) -> Self::Params;

    /// A new instance of the same family and configuration whose data are
    /// simulated from `params` (for the parametric bootstrap).
    fn resample(&self, params: &Self::Params, seed: u64) -> Result<Self>
    where
        Self: Sized;

    /// Relabel `params` so its regimes line up with `reference`.
    fn align_to(&self, params: &Self::Params, reference: &Self::Params) -> Self::Params;

    /// Named flat view of a parameter vector, in a fixed order.
    fn flatten(&self, params: &Self::Params) -> Vec<(String, f64)>;
}

/// Outcome of one EM run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport<P> {
    pub params: P,
    pub log_likelihood: f64,
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Which start of a multi-start run produced this fit (0 for plain EM).
    pub restart_index: usize,
    pub aic: f64,
    pub bic: f64,
    pub npar: usize,
    /// Observation count used in the BIC penalty.
    pub n_obs: usize,
}

fn information_criteria<M: EmModel>(
    model: &M,
    loglik: f64,
    cfg: &EmConfig,
) -> (f64, f64, usize, usize) {
    let npar = model.npar();
    let n_bic = match cfg.bic_n {
        BicConvention::Conditional => model.n_obs(),
        BicConvention::Total => model.n_obs() + model.n_conditioning(),
    };
    let aic = -2.0 * loglik + 2.0 * npar as f64;
    let bic = -2.0 * loglik + npar as f64 * (n_bic as f64).ln();
    (aic, bic, npar, n_bic)
}

/// Run EM from `init` until the improvement drops below `cfg.tol` or
/// `cfg.max_iters` sweeps have run. The trace holds the log-likelihood at
/// the start of every sweep and is non-decreasing up to round-off.
pub fn em_fit<M: EmModel>(model: &M, init: M::Params, cfg: &EmConfig) -> Result<FitReport<M::Params>> {
    let mut params = init;
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let (ll, next) = model.em_iterate(&params)?;
        if let Some(&prev) = trace.last() {
            trace.push(ll);
            if ll - prev < cfg.tol {
                converged = true;
                break;
            }
        } else {
            trace.push(ll);
        }
        params = next;
    }
    let log_likelihood = *trace.last().expect("at least one EM sweep");
    let iterations = trace.len();
    let (aic, bic, npar, n_bic) = information_criteria(model, log_likelihood, cfg);
    Ok(FitReport {
        params,
        log_likelihood,
        loglik_trace: trace,
        converged,
        iterations,
        restart_index: 0,
        aic,
        bic,
        npar,
        n_obs: n_bic,
    })
}

fn run_starts<M: EmModel>(
    model: &M,
    starts: Vec<M::Params>,
    cfg: &EmConfig,
) -> Result<FitReport<M::Params>> {
    let n = starts.len();
    let results: Vec<(usize, Result<FitReport<M::Params>>)> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, init)| (i, em_fit(model, init, cfg)))
        .collect();

    let mut best: Option<FitReport<M::Params>> = None;
    let mut last_err = String::from("no starts ran");
    for (i, res) in results {
        match res {
            Ok(mut report) => {
                if !report.log_likelihood.is_finite() || !model.accept(&report.params) {
                    last_err = format!("start {i} converged to a degenerate optimum");
                    continue;
                }
                report.restart_index = i;
                if best
                    .as_ref()
                    .map_or(true, |b| report.log_likelihood > b.log_likelihood)
                {
                    best = Some(report);
                }
            }
            Err(e) => last_err = format!("start {i}: {e}"),
        }
    }
    best.ok_or(Error::AllStartsFailed {
        starts: n,
        last: last_err,
    })
}

/// EM from `n_starts` initializations: one deterministic moment-based start
/// and `n_starts - 1` randomized perturbations of it. Deterministic given
/// `seed`; starts run in parallel. Returns the best accepted fit.
pub fn multi_start_fit<M: EmModel>(
    model: &M,
    n_starts: usize,
    seed: u64,
    cfg: &EmConfig,
) -> Result<FitReport<M::Params>> {
    assert!(n_starts >= 1, "need at least one start");
    let base = model.moment_start()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![base.clone()];
    for _ in 1..n_starts {
        starts.push(model.perturb(&base, &mut rng));
    }
    run_starts(model, starts, cfg)
}

/// Like [`multi_start_fit`] but seeded at an explicit base parameter vector
/// (used by bootstrap replicate refits).
pub fn multi_start_from<M: EmModel>(
    model: &M,
    base: &M::Params,
    n_starts: usize,
    seed: u64,
    cfg: &EmConfig,
) -> Result<FitReport<M::Params>> {
    assert!(n_starts >= 1, "need at least one start");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = vec![base.clone()];
    for _ in 1..n_starts {
        starts.push(model.perturb(base, &mut rng));
    }
    run_starts(model, starts, cfg)
}

/// Derive a stream of independent task seeds from a master seed.
pub(crate) fn derive_seeds(master: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..count).map(|_| rng.next_u64()).collect()
}

/// One row of a model-comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub name: String,
    pub log_likelihood: f64,
    pub npar: usize,
    pub n_obs: usize,
    pub aic: f64,
    pub bic: f64,
}

impl FitSummary {
    pub fn new(name: impl Into<String>, log_likelihood: f64, npar: usize, n_obs: usize) -> Self {
        FitSummary {
            name: name.into(),
            log_likelihood,
            npar,
            n_obs,
            aic: -2.0 * log_likelihood + 2.0 * npar as f64,
            bic: -2.0 * log_likelihood + npar as f64 * (n_obs as f64).ln(),
        }
    }
}

/// AIC/BIC comparison across fits of the same data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionTable {
    pub rows: Vec<FitSummary>,
    pub best_aic: usize,
    pub best_bic: usize,
}

/// Rank fits by AIC and BIC. All fits must share the observation count;
/// otherwise the criteria are not comparable.
pub fn model_select(rows: Vec<FitSummary>) -> Result<SelectionTable> {
    if rows.is_empty() {
        return Err(Error::InconsistentData("no fits supplied".into()));
    }
    let n0 = rows[0].n_obs;
    if let Some(bad) = rows.iter().find(|r| r.n_obs != n0) {
        return Err(Error::InconsistentData(format!(
            "{} has n_obs {} but {} has {}",
            rows[0].name, n0, bad.name, bad.n_obs
        )));
    }
    let best_aic = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.aic.partial_cmp(&b.1.aic).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let best_bic = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.bic.partial_cmp(&b.1.bic).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    Ok(SelectionTable {
        rows,
        best_aic,
        best_bic,
    })
}
