//! The two concrete EM families: the Gaussian switching autoregression and
//! the precipitation model.

use itertools::Itertools;
use ndarray::{Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::filter::forward_filter;
use crate::gaussian_ar::{
    fit_setar, m_step_ar, m_step_transition, ConstraintMode, GaussianArParams, TransitionRow,
};
use crate::rainfall::{m_step_gamma, m_step_kernel, KernelRow, RainfallNhmmParams};
use crate::simulate::simulate;
use crate::smooth::backward_smooth;

use super::EmModel;

/// The Gaussian switching autoregression bound to one observed series.
#[derive(Debug, Clone)]
pub struct GaussianArEm {
    pub y_init: Vec<f64>,
    pub y: Vec<f64>,
    /// Regime the filter conditions on at time zero.
    pub x0: usize,
    pub num_regimes: usize,
    pub order: usize,
    pub trans_lag: usize,
    pub mode: ConstraintMode,
    /// Lower clamp on every regime's innovation scale; converged fits sitting
    /// on the clamp are rejected as degenerate spikes.
    pub sigma_floor: f64,
}

impl GaussianArEm {
    pub fn new(
        y_init: Vec<f64>,
        y: Vec<f64>,
        num_regimes: usize,
        order: usize,
        trans_lag: usize,
        mode: ConstraintMode,
    ) -> Self {
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        GaussianArEm {
            y_init,
            y,
            x0: 0,
            num_regimes,
            order,
            trans_lag,
            mode,
            sigma_floor: (1e-4 * sd).max(1e-12),
        }
    }

    fn full_series(&self) -> Vec<f64> {
        let mut full = self.y_init.clone();
        full.extend_from_slice(&self.y);
        full
    }

    /// Lag-r covariate steering each of the T transition steps.
    fn covariates(&self) -> Vec<f64> {
        let full = self.full_series();
        let (s, r) = (self.order, self.trans_lag);
        (0..self.y.len()).map(|k| full[s + k - r]).collect()
    }

    fn transition_rows(&self, params: &GaussianArParams) -> Vec<TransitionRow> {
        (0..self.num_regimes)
            .map(|x| TransitionRow {
                pi_minus: params.pi_minus[x],
                pi_plus: params.pi_plus[x],
                lambda0: params.lambda0[x],
                lambda1: params.lambda1[x],
            })
            .collect()
    }

    fn default_floors(&self) -> (f64, f64) {
        match self.mode {
            ConstraintMode::ThetaPrime => (0.05, 0.05),
            ConstraintMode::ThetaDoublePrime { pi0 } | ConstraintMode::Homogeneous { pi0 } => {
                (pi0, pi0)
            }
        }
    }

    /// Start from a deterministic split of the steps by the lag-r value:
    /// a profiled threshold split when M = 2, quantile bins otherwise, with
    /// per-bin least squares for the regime dynamics and threshold-shaped
    /// logistic coefficients.
    fn split_start(&self) -> Result<GaussianArParams> {
        let m = self.num_regimes;
        let cov = self.covariates();
        let mut sorted = cov.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let quantile = |q: f64| sorted[((sorted.len() - 1) as f64 * q) as usize];
        let sd_cov = {
            let n = cov.len() as f64;
            let mean = cov.iter().sum::<f64>() / n;
            (cov.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n)
                .sqrt()
                .max(1e-6)
        };

        let (pi_minus, pi_plus) = self.default_floors();
        if m == 2 {
            if let Ok(setar) = fit_setar(&self.y_init, &self.y, self.order, self.trans_lag) {
                let c = setar.threshold;
                let slope = 4.0 / sd_cov;
                let lambda1 = match self.mode {
                    ConstraintMode::Homogeneous { .. } => vec![0.0, 0.0],
                    _ => vec![slope, -slope],
                };
                let lambda0 = match self.mode {
                    ConstraintMode::Homogeneous { .. } => vec![-2.2, -2.2],
                    _ => vec![-slope * c, slope * c],
                };
                return Ok(GaussianArParams {
                    order: self.order,
                    trans_lag: self.trans_lag,
                    num_regimes: 2,
                    beta: setar.beta.clone(),
                    sigma: setar
                        .sigma
                        .iter()
                        .map(|&s| s.max(self.sigma_floor * 10.0))
                        .collect(),
                    pi_minus: vec![pi_minus; 2],
                    pi_plus: vec![pi_plus; 2],
                    lambda0,
                    lambda1,
                });
            }
        }

        // Quantile bins on the lag covariate.
        let full = self.full_series();
        let s = self.order;
        let mut beta = Vec::with_capacity(m);
        let mut sigma = Vec::with_capacity(m);
        for b in 0..m {
            let lo = quantile(b as f64 / m as f64);
            let hi = quantile((b + 1) as f64 / m as f64);
            let idx: Vec<usize> = (0..self.y.len())
                .filter(|&k| {
                    let v = cov[k];
                    (v >= lo || b == 0) && (v <= hi || b == m - 1)
                })
                .collect();
            let d = s + 1;
            let mut xtx = vec![vec![0.0; d]; d];
            let mut xty = vec![0.0; d];
            for &k in &idx {
                let mut row = vec![1.0];
                for l in 1..=s {
                    row.push(full[k + s - l]);
                }
                for i in 0..d {
                    for j in 0..d {
                        xtx[i][j] += row[i] * row[j];
                    }
                    xty[i] += row[i] * self.y[k];
                }
            }
            let bet = crate::linalg::spd_solve(&xtx, &xty, 1e-10)
                .ok_or(Error::SingularDesign { regime: b })?;
            let mut sse = 0.0;
            for &k in &idx {
                let mut fit = bet[0];
                for l in 1..=s {
                    fit += bet[l] * full[k + s - l];
                }
                sse += (self.y[k] - fit).powi(2);
            }
            sigma.push((sse / idx.len().max(1) as f64).sqrt().max(self.sigma_floor * 10.0));
            beta.push(bet);
        }
        let slope = 4.0 / sd_cov;
        let median = quantile(0.5);
        let (lambda0, lambda1): (Vec<f64>, Vec<f64>) = match self.mode {
            ConstraintMode::Homogeneous { .. } => (vec![-2.2; m], vec![0.0; m]),
            _ => (0..m)
                .map(|b| {
                    let sign = if b % 2 == 0 { 1.0 } else { -1.0 };
                    (-sign * slope * median, sign * slope)
                })
                .unzip(),
        };
        Ok(GaussianArParams {
            order: self.order,
            trans_lag: self.trans_lag,
            num_regimes: m,
            beta,
            sigma,
            pi_minus: vec![pi_minus; m],
            pi_plus: vec![pi_plus; m],
            lambda0,
            lambda1,
        })
    }
}

impl EmModel for GaussianArEm {
    type Params = GaussianArParams;

    fn loglik(&self, params: &Self::Params) -> Result<f64> {
        Ok(forward_filter(params, self.x0, &self.y_init, &self.y)?.log_likelihood)
    }

    fn em_iterate(&self, params: &Self::Params) -> Result<(f64, Self::Params)> {
        let m = self.num_regimes;
        let t = self.y.len();
        let filter = forward_filter(params, self.x0, &self.y_init, &self.y)?;
        let smooth = backward_smooth(params, &filter, &self.y_init, &self.y)?;

        // Pairwise weights for every transition step, including the first
        // one out of the known initial regime; leaving it out would make the
        // numeric M-step optimize a slightly different objective than the
        // likelihood and could break monotone ascent.
        let mut xi_full: Vec<Array2<f64>> = Vec::with_capacity(t);
        let mut first = Array2::zeros((m, m));
        for x in 0..m {
            first[(self.x0, x)] = smooth.gamma[(0, x)];
        }
        xi_full.push(first);
        for k in 0..t - 1 {
            xi_full.push(smooth.xi.index_axis(Axis(0), k).to_owned());
        }

        let ar = m_step_ar(&smooth.gamma, &self.y_init, &self.y, self.order)?;
        let cov = self.covariates();
        let trans = m_step_transition(&xi_full, &cov, self.mode, &self.transition_rows(params));

        let mut next = params.clone();
        next.beta = ar.beta;
        next.sigma = ar
            .sigma
            .into_iter()
            .map(|s| s.max(self.sigma_floor))
            .collect();
        for (x, row) in trans.params.iter().enumerate() {
            next.pi_minus[x] = row.pi_minus;
            next.pi_plus[x] = row.pi_plus;
            next.lambda0[x] = row.lambda0;
            next.lambda1[x] = row.lambda1;
        }
        Ok((filter.log_likelihood, next))
    }

    fn npar(&self) -> usize {
        let per_regime_trans = match self.mode {
            ConstraintMode::ThetaPrime => 4,
            ConstraintMode::ThetaDoublePrime { .. } => 2,
            ConstraintMode::Homogeneous { .. } => 1,
        };
        self.num_regimes * (self.order + 2 + per_regime_trans)
    }

    fn n_obs(&self) -> usize {
        self.y.len()
    }

    fn n_conditioning(&self) -> usize {
        self.order
    }

    fn accept(&self, params: &Self::Params) -> bool {
        params.sigma.iter().all(|&s| s > self.sigma_floor * 1.001)
    }

    fn moment_start(&self) -> Result<Self::Params> {
        self.split_start()
    }

    fn perturb(&self, base: &Self::Params, rng: &mut ChaCha8Rng) -> Self::Params {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut p = base.clone();
        for x in 0..p.num_regimes {
            for b in p.beta[x].iter_mut() {
                *b += 0.3 * normal.sample(rng) * (b.abs() + 0.1);
            }
            p.sigma[x] *= (0.4 * normal.sample(rng)).exp();
            p.sigma[x] = p.sigma[x].max(self.sigma_floor * 10.0);
            match self.mode {
                ConstraintMode::Homogeneous { .. } => {
                    p.lambda0[x] += normal.sample(rng);
                }
                _ => {
                    p.lambda0[x] += 2.0 * normal.sample(rng) * (p.lambda0[x].abs() * 0.3 + 1.0);
                    p.lambda1[x] += 2.0 * normal.sample(rng) * (p.lambda1[x].abs() * 0.3 + 1.0);
                }
            }
        }
        p
    }

    fn resample(&self, params: &Self::Params, seed: u64) -> Result<Self> {
        let traj = simulate(params, self.x0, &self.y_init, self.y.len(), seed)?;
        let mut clone = self.clone();
        clone.y = traj.observations;
        Ok(clone)
    }

    fn align_to(&self, params: &Self::Params, reference: &Self::Params) -> Self::Params {
        let m = params.num_regimes;
        let flat_ref = reference.flatten();
        let best = (0..m)
            .permutations(m)
            .min_by(|a, b| {
                let da = perm_distance(params, a, &flat_ref);
                let db = perm_distance(params, b, &flat_ref);
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        params.permute_regimes(&best)
    }

    fn flatten(&self, params: &Self::Params) -> Vec<(String, f64)> {
        params.flatten()
    }
}

fn perm_distance(params: &GaussianArParams, perm: &[usize], flat_ref: &[(String, f64)]) -> f64 {
    params
        .permute_regimes(perm)
        .flatten()
        .iter()
        .zip(flat_ref)
        .map(|((_, a), (_, b))| (a - b).abs())
        .fold(0.0, f64::max)
}

/// The precipitation model bound to covariate and rainfall records.
#[derive(Debug, Clone)]
pub struct RainfallEm {
    /// Covariates z_0 .. z_T: entry k steers the transition into step k+1.
    pub z: Vec<Array1<f64>>,
    /// Rainfall r_1 .. r_T.
    pub rain: Vec<Array1<f64>>,
    pub x0: usize,
    pub num_regimes: usize,
    pub sigma_mat: Array2<f64>,
}

impl RainfallEm {
    pub fn new(
        z: Vec<Array1<f64>>,
        rain: Vec<Array1<f64>>,
        num_regimes: usize,
        sigma_mat: Array2<f64>,
    ) -> Result<Self> {
        if z.len() != rain.len() + 1 {
            return Err(Error::DimensionMismatch {
                what: "covariate path (needs one leading conditioning entry)".into(),
                expected: rain.len() + 1,
                got: z.len(),
            });
        }
        Ok(RainfallEm {
            z,
            rain,
            x0: 0,
            num_regimes,
            sigma_mat,
        })
    }

    fn observations(&self) -> (Vec<crate::rainfall::WeatherObs>, Vec<crate::rainfall::WeatherObs>) {
        let stations = self.rain[0].len();
        let init = vec![crate::rainfall::WeatherObs {
            z: self.z[0].clone(),
            r: Array1::zeros(stations),
        }];
        let obs: Vec<crate::rainfall::WeatherObs> = (0..self.rain.len())
            .map(|k| crate::rainfall::WeatherObs {
                z: self.z[k + 1].clone(),
                r: self.rain[k].clone(),
            })
            .collect();
        (init, obs)
    }

    fn kernel_rows(params: &RainfallNhmmParams) -> Vec<KernelRow> {
        let m = params.num_regimes;
        let d = params.covariate_dim;
        (0..m)
            .map(|x| KernelRow {
                q: (0..m).map(|x2| params.q[(x, x2)]).collect(),
                mu: (0..m)
                    .map(|x2| (0..d).map(|j| params.mu[(x, x2, j)]).collect())
                    .collect(),
            })
            .collect()
    }
}

impl EmModel for RainfallEm {
    type Params = RainfallNhmmParams;

    fn loglik(&self, params: &Self::Params) -> Result<f64> {
        let (init, obs) = self.observations();
        let model = params.model_over(self.z.iter())?;
        Ok(forward_filter(&model, self.x0, &init, &obs)?.log_likelihood)
    }

    fn em_iterate(&self, params: &Self::Params) -> Result<(f64, Self::Params)> {
        let m = self.num_regimes;
        let t = self.rain.len();
        let stations = self.rain[0].len();
        let (init, obs) = self.observations();
        let model = params.model_over(self.z.iter())?;
        let filter = forward_filter(&model, self.x0, &init, &obs)?;
        let smooth = backward_smooth(&model, &filter, &init, &obs)?;

        let mut xi_full: Vec<Array2<f64>> = Vec::with_capacity(t);
        let mut first = Array2::zeros((m, m));
        for x in 0..m {
            first[(self.x0, x)] = smooth.gamma[(0, x)];
        }
        xi_full.push(first);
        for k in 0..t - 1 {
            xi_full.push(smooth.xi.index_axis(Axis(0), k).to_owned());
        }
        // Covariates steering transitions 1..T are z_0 .. z_{T-1}.
        let z_steps: Vec<Array1<f64>> = self.z[..t].to_vec();

        let mut next = params.clone();
        for x in 0..m {
            let weights: Vec<f64> = (0..t).map(|k| smooth.gamma[(k, x)]).collect();
            for i in 0..stations {
                let series: Vec<f64> = (0..t).map(|k| self.rain[k][i]).collect();
                let (pi, alpha, beta) = m_step_gamma(
                    &weights,
                    &series,
                    params.alpha[(x, i)],
                    params.beta_gamma[(x, i)],
                )?;
                // Keep wet probabilities interior so the likelihood stays finite.
                next.pi_rain[(x, i)] = pi.clamp(1e-12, 1.0 - 1e-12);
                next.alpha[(x, i)] = alpha;
                next.beta_gamma[(x, i)] = beta;
            }
        }
        let kernel = m_step_kernel(&xi_full, &z_steps, &self.sigma_mat, &Self::kernel_rows(params))?;
        for (x, row) in kernel.rows.iter().enumerate() {
            for x2 in 0..m {
                next.q[(x, x2)] = row.q[x2];
                for j in 0..params.covariate_dim {
                    next.mu[(x, x2, j)] = row.mu[x2][j];
                }
            }
        }
        Ok((filter.log_likelihood, next))
    }

    fn npar(&self) -> usize {
        let m = self.num_regimes;
        let l = self.rain[0].len();
        let d = self.sigma_mat.nrows();
        // q rows lose one degree of freedom to the sum constraint, mu rows
        // lose one vector; three emission parameters per regime-station.
        m * (m - 1) + m * (m - 1) * d + 3 * m * l
    }

    fn n_obs(&self) -> usize {
        self.rain.len()
    }

    fn n_conditioning(&self) -> usize {
        1
    }

    fn accept(&self, params: &Self::Params) -> bool {
        params.alpha.iter().all(|&a| a.is_finite() && a < 1e6)
    }

    fn moment_start(&self) -> Result<Self::Params> {
        let m = self.num_regimes;
        let l = self.rain[0].len();
        let d = self.sigma_mat.nrows();
        let t = self.rain.len();
        // Split days into M bins by total rainfall, then fit each bin's
        // stations marginally.
        let totals: Vec<f64> = self.rain.iter().map(|r| r.sum()).collect();
        let mut order: Vec<usize> = (0..t).collect();
        order.sort_by(|&a, &b| totals[a].partial_cmp(&totals[b]).unwrap());
        let mut pi_rain = Array2::zeros((m, l));
        let mut alpha = Array2::zeros((m, l));
        let mut beta_gamma = Array2::zeros((m, l));
        for b in 0..m {
            let lo = b * t / m;
            let hi = ((b + 1) * t / m).max(lo + 1).min(t);
            let idx = &order[lo..hi];
            for i in 0..l {
                let series: Vec<f64> = idx.iter().map(|&k| self.rain[k][i]).collect();
                let weights = vec![1.0; series.len()];
                let (pi, a, bg) = match m_step_gamma(&weights, &series, 1.0, 1.0) {
                    Ok(v) => v,
                    Err(_) => (0.5, 1.0, 1.0),
                };
                pi_rain[(b, i)] = pi.clamp(0.05, 0.95);
                alpha[(b, i)] = a;
                beta_gamma[(b, i)] = bg;
            }
        }
        let q = Array2::from_elem((m, m), 1.0 / m as f64);
        Ok(RainfallNhmmParams {
            num_regimes: m,
            num_stations: l,
            covariate_dim: d,
            q,
            mu: ndarray::Array3::zeros((m, m, d)),
            sigma_mat: self.sigma_mat.clone(),
            pi_rain,
            alpha,
            beta_gamma,
        })
    }

    fn perturb(&self, base: &Self::Params, rng: &mut ChaCha8Rng) -> Self::Params {
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut p = base.clone();
        let m = p.num_regimes;
        for x in 0..m {
            let mut row: Vec<f64> = (0..m)
                .map(|x2| p.q[(x, x2)] * (0.3f64 * normal.sample(rng)).exp())
                .collect();
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= total);
            for x2 in 0..m {
                p.q[(x, x2)] = row[x2];
                for j in 0..p.covariate_dim {
                    p.mu[(x, x2, j)] += 0.2 * normal.sample(rng);
                }
            }
            // recentre mu
            for j in 0..p.covariate_dim {
                let mean: f64 = (0..m).map(|x2| p.mu[(x, x2, j)]).sum::<f64>() / m as f64;
                for x2 in 0..m {
                    p.mu[(x, x2, j)] -= mean;
                }
            }
            for i in 0..p.num_stations {
                p.pi_rain[(x, i)] = (p.pi_rain[(x, i)] + 0.05 * normal.sample(rng)).clamp(0.02, 0.98);
                p.alpha[(x, i)] *= (0.3 * normal.sample(rng)).exp();
                p.beta_gamma[(x, i)] *= (0.3 * normal.sample(rng)).exp();
            }
        }
        p
    }

    fn resample(&self, params: &Self::Params, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (_, rain) =
            params.simulate_given_covariates(self.x0, &self.z[..self.rain.len()], &mut rng)?;
        let mut clone = self.clone();
        clone.rain = rain;
        Ok(clone)
    }

    fn align_to(&self, params: &Self::Params, reference: &Self::Params) -> Self::Params {
        let m = params.num_regimes;
        let flat_ref = self.flatten(reference);
        let best = (0..m)
            .permutations(m)
            .min_by(|a, b| {
                let da = self.perm_gap(params, a, &flat_ref);
                let db = self.perm_gap(params, b, &flat_ref);
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        params.permute_regimes(&best)
    }

    fn flatten(&self, params: &Self::Params) -> Vec<(String, f64)> {
        let m = params.num_regimes;
        let mut out = Vec::new();
        for x in 0..m {
            for x2 in 0..m {
                out.push((format!("q_{x}_{x2}"), params.q[(x, x2)]));
            }
            for x2 in 0..m {
                for j in 0..params.covariate_dim {
                    out.push((format!("mu_{x}_{x2}_{j}"), params.mu[(x, x2, j)]));
                }
            }
            for i in 0..params.num_stations {
                out.push((format!("pi_rain_{x}_{i}"), params.pi_rain[(x, i)]));
                out.push((format!("alpha_{x}_{i}"), params.alpha[(x, i)]));
                out.push((format!("beta_{x}_{i}"), params.beta_gamma[(x, i)]));
            }
        }
        out
    }
}

impl RainfallEm {
    fn perm_gap(
        &self,
        params: &RainfallNhmmParams,
        perm: &[usize],
        flat_ref: &[(String, f64)],
    ) -> f64 {
        self.flatten(&params.permute_regimes(perm))
            .iter()
            .zip(flat_ref)
            .map(|((_, a), (_, b))| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
