//! Simulation experiment: how fast do multi-start EM estimates approach the
//! generating parameters as the series grows?

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_ar::{param_distance, stability_check, ConstraintMode, GaussianArParams};
use crate::simulate::simulate;

use super::{derive_seeds, multi_start_fit, EmConfig, GaussianArEm};

/// Distance summary for one series length.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyCell {
    pub n: usize,
    /// Median distance-to-truth (up to relabeling) over the replications.
    pub median_distance: f64,
    /// 90th percentile of the same distances.
    pub q90_distance: f64,
    pub failures: usize,
    pub replications: usize,
}

/// For each length, simulate `replications` series from `truth`, fit each by
/// multi-start EM, and summarize the distances to the truth up to regime
/// relabeling. The generating model must pass a stability check so long
/// simulations do not wander off.
///
/// Deterministic given `seed`; cells and replications run in parallel.
pub fn consistency_experiment(
    truth: &GaussianArParams,
    mode: ConstraintMode,
    lengths: &[usize],
    replications: usize,
    n_starts: usize,
    seed: u64,
    cfg: &EmConfig,
) -> Result<Vec<ConsistencyCell>> {
    truth.validate()?;
    let stable = stability_check(truth, truth.num_regimes - 1)?;
    if !(stable.uniform_contraction || stable.mixture_contraction) {
        return Err(Error::InvalidParams(
            "generating model fails both contraction checks; simulations may be explosive".into(),
        ));
    }

    let burn_in = 200;
    let s = truth.order;
    let seeds = derive_seeds(seed, lengths.len() * replications);

    let mut cells = Vec::with_capacity(lengths.len());
    for (li, &n) in lengths.iter().enumerate() {
        let distances: Vec<Option<f64>> = (0..replications)
            .into_par_iter()
            .map(|rep| {
                let task_seed = seeds[li * replications + rep];
                let y_init = vec![0.0; s];
                let traj = simulate(truth, 0, &y_init, burn_in + s + n, task_seed).ok()?;
                let warm = &traj.observations[burn_in..];
                let model = GaussianArEm::new(
                    warm[..s].to_vec(),
                    warm[s..].to_vec(),
                    truth.num_regimes,
                    truth.order,
                    truth.trans_lag,
                    mode,
                );
                let fit = multi_start_fit(&model, n_starts, task_seed ^ 0x9e37_79b9, cfg).ok()?;
                param_distance(&fit.params, truth).ok()
            })
            .collect();

        let mut ok: Vec<f64> = distances.iter().filter_map(|d| *d).collect();
        let failures = replications - ok.len();
        ok.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let (median, q90) = if ok.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            let mid = ok[ok.len() / 2];
            let q90 = ok[((ok.len() - 1) as f64 * 0.9).round() as usize];
            (mid, q90)
        };
        cells.push(ConsistencyCell {
            n,
            median_distance: median,
            q90_distance: q90,
            failures,
            replications,
        });
    }
    Ok(cells)
}
