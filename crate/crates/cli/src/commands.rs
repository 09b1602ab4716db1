//! Subcommand implementations.

use std::fs;
use std::io::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use nhmsar::estimation::{
    model_select, multi_start_fit, parametric_bootstrap, EmConfig, EmModel, FitReport, FitSummary,
    GaussianArEm, RainfallEm,
};
use nhmsar::gaussian_ar::{fit_setar, stability_check, ConstraintMode, GaussianArParams};
use nhmsar::{backward_smooth, forward_filter, simulate as simulate_traj, Error};

use crate::io::{
    read_params, read_series, write_probs_csv, write_stable_json, Family, ParamsFile, RainfallJson,
    SCHEMA,
};
use crate::{
    BootstrapArgs, CliError, ConstraintArg, FamilyArg, FitArgs, SelectArgs, SimulateArgs,
    StabilityArgs, Transform,
};

/// Everything needed to reproduce a fit, embedded in every output file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfigJson {
    pub family: Family,
    pub m: usize,
    pub s: usize,
    pub r: usize,
    pub pi_fixed: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint: Option<String>,
    pub starts: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    pub x0: usize,
    pub transform: String,
    pub data: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitMetaJson {
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub npar: usize,
    pub n_obs: usize,
    pub converged: bool,
    pub iterations: usize,
    pub restart_index: usize,
    pub loglik_trace: Vec<f64>,
}

impl FitMetaJson {
    fn from_report<P>(r: &FitReport<P>) -> Self {
        FitMetaJson {
            log_likelihood: r.log_likelihood,
            aic: r.aic,
            bic: r.bic,
            npar: r.npar,
            n_obs: r.n_obs,
            converged: r.converged,
            iterations: r.iterations,
            restart_index: r.restart_index,
            loglik_trace: r.loglik_trace.clone(),
        }
    }
}

fn transform_name(t: Transform) -> &'static str {
    match t {
        Transform::None => "none",
        Transform::Log10 => "log10",
    }
}

fn apply_transform(t: Transform, values: &[f64]) -> Result<Vec<f64>, CliError> {
    match t {
        Transform::None => Ok(values.to_vec()),
        Transform::Log10 => {
            if let Some(bad) = values.iter().find(|v| **v <= 0.0) {
                return Err(CliError::parse(format!(
                    "log10 transform requires positive values, found {bad}"
                )));
            }
            Ok(values.iter().map(|v| v.log10()).collect())
        }
    }
}

fn constraint_mode(args_family: FamilyArg, constraint: ConstraintArg, pi0: f64) -> ConstraintMode {
    match args_family {
        FamilyArg::Msar => ConstraintMode::Homogeneous { pi0 },
        _ => match constraint {
            ConstraintArg::ThetaPrime => ConstraintMode::ThetaPrime,
            ConstraintArg::ThetaDoubleprime => ConstraintMode::ThetaDoublePrime { pi0 },
        },
    }
}

fn constraint_name(mode: ConstraintMode) -> String {
    match mode {
        ConstraintMode::ThetaPrime => "theta-prime".into(),
        ConstraintMode::ThetaDoublePrime { .. } => "theta-doubleprime".into(),
        ConstraintMode::Homogeneous { .. } => "homogeneous".into(),
    }
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let series = read_series(&args.data)?;
    let config = FitConfigJson {
        family: match args.family {
            FamilyArg::Nhmsar => Family::Nhmsar,
            FamilyArg::Msar => Family::Msar,
            FamilyArg::Setar => Family::Setar,
            FamilyArg::Rainfall => Family::Rainfall,
        },
        m: args.m,
        s: args.s,
        r: args.r,
        pi_fixed: args.pi_fixed,
        constraint: None,
        starts: args.starts,
        seed: args.seed,
        max_iter: args.max_iter,
        tol: args.tol,
        x0: args.x0,
        transform: transform_name(args.transform).into(),
        data: args.data.display().to_string(),
    };
    let em_cfg = EmConfig {
        max_iters: args.max_iter,
        tol: args.tol,
        ..EmConfig::default()
    };

    match args.family {
        FamilyArg::Setar => {
            let y = apply_transform(args.transform, &series.value)?;
            if y.len() <= args.s {
                return Err(CliError::parse("series shorter than the order"));
            }
            let (y_init, obs) = y.split_at(args.s);
            let setar = fit_setar(y_init, obs, args.s, args.r)
                .map_err(|e| CliError::fit(e.to_string()))?;
            let meta = FitMetaJson {
                log_likelihood: setar.log_likelihood,
                aic: -2.0 * setar.log_likelihood + 2.0 * setar.npar as f64,
                bic: -2.0 * setar.log_likelihood
                    + setar.npar as f64 * (setar.n_obs as f64).ln(),
                npar: setar.npar,
                n_obs: setar.n_obs,
                converged: true,
                iterations: 1,
                restart_index: 0,
                loglik_trace: vec![setar.log_likelihood],
            };
            if let Some(p) = &args.probs_out {
                // Deterministic regime indicators.
                let mut gamma = Array2::zeros((obs.len(), 2));
                let mut full = y_init.to_vec();
                full.extend_from_slice(obs);
                for k in 0..obs.len() {
                    let lag = full[k + args.s - args.r];
                    let x = usize::from(lag > setar.threshold);
                    gamma[(k, x)] = 1.0;
                }
                write_probs_csv(p, &series.index[args.s..], &gamma)?;
            }
            let file = ParamsFile {
                schema: SCHEMA.into(),
                family: Family::Setar,
                config: Some(config),
                gaussian: None,
                setar: Some(setar),
                rainfall: None,
                fit: Some(meta),
            };
            write_stable_json(&args.out, &file)?;
        }
        FamilyArg::Nhmsar | FamilyArg::Msar => {
            let y = apply_transform(args.transform, &series.value)?;
            if y.len() <= args.s {
                return Err(CliError::parse("series shorter than the order"));
            }
            let (y_init, obs) = y.split_at(args.s);
            let mode = constraint_mode(args.family, args.constraint, args.pi_fixed);
            let mut model = GaussianArEm::new(
                y_init.to_vec(),
                obs.to_vec(),
                args.m,
                args.s,
                args.r,
                mode,
            );
            model.x0 = args.x0;
            let report = multi_start_fit(&model, args.starts, args.seed, &em_cfg)
                .map_err(|e| CliError::fit(e.to_string()))?;
            if let Some(p) = &args.probs_out {
                let filt = forward_filter(&report.params, args.x0, y_init, obs)
                    .map_err(|e| CliError::fit(e.to_string()))?;
                let smooth = backward_smooth(&report.params, &filt, y_init, obs)
                    .map_err(|e| CliError::fit(e.to_string()))?;
                write_probs_csv(p, &series.index[args.s..], &smooth.gamma)?;
            }
            let mut config = config;
            config.constraint = Some(constraint_name(mode));
            let file = ParamsFile {
                schema: SCHEMA.into(),
                family: config.family,
                config: Some(config),
                gaussian: Some(report.params.clone()),
                setar: None,
                rainfall: None,
                fit: Some(FitMetaJson::from_report(&report)),
            };
            write_stable_json(&args.out, &file)?;
        }
        FamilyArg::Rainfall => {
            if series.covariates.is_empty() || series.rainfall.is_empty() {
                return Err(CliError::parse(
                    "rainfall fits need z* covariate and r* station columns",
                ));
            }
            // The first row conditions the transition into the first
            // modeled day.
            let z = series.covariates.clone();
            let rain = series.rainfall[1..].to_vec();
            let d = z[0].len();
            let model = RainfallEm::new(z, rain, args.m, Array2::eye(d))
                .map_err(|e| CliError::parse(e.to_string()))?;
            let report = multi_start_fit(&model, args.starts, args.seed, &em_cfg)
                .map_err(|e| CliError::fit(e.to_string()))?;
            if let Some(p) = &args.probs_out {
                let bound = report
                    .params
                    .model_over(model.z.iter())
                    .map_err(|e| CliError::fit(e.to_string()))?;
                let stations = model.rain[0].len();
                let init = vec![nhmsar::rainfall::WeatherObs {
                    z: model.z[0].clone(),
                    r: ndarray::Array1::zeros(stations),
                }];
                let obs: Vec<nhmsar::rainfall::WeatherObs> = (0..model.rain.len())
                    .map(|k| nhmsar::rainfall::WeatherObs {
                        z: model.z[k + 1].clone(),
                        r: model.rain[k].clone(),
                    })
                    .collect();
                let filt = forward_filter(&bound, args.x0, &init, &obs)
                    .map_err(|e| CliError::fit(e.to_string()))?;
                let smooth = backward_smooth(&bound, &filt, &init, &obs)
                    .map_err(|e| CliError::fit(e.to_string()))?;
                write_probs_csv(p, &series.index[1..], &smooth.gamma)?;
            }
            let file = ParamsFile {
                schema: SCHEMA.into(),
                family: Family::Rainfall,
                config: Some(config),
                gaussian: None,
                setar: None,
                rainfall: Some(RainfallJson::from(&report.params)),
                fit: Some(FitMetaJson::from_report(&report)),
            };
            write_stable_json(&args.out, &file)?;
        }
    }
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let file = read_params(&args.params)?;
    let mut out = fs::File::create(&args.out)
        .map_err(|e| CliError::parse(format!("{}: {e}", args.out.display())))?;
    writeln!(
        out,
        "# nhmsar simulate seed={} x0={} length={} params={}",
        args.seed,
        args.x0,
        args.length,
        args.params.display()
    )
    .map_err(|e| CliError::parse(e.to_string()))?;

    match file.family {
        Family::Nhmsar | Family::Msar => {
            let params = file
                .gaussian
                .ok_or_else(|| CliError::parse("file holds no autoregressive parameters"))?;
            params
                .validate()
                .map_err(|e| CliError::parse(e.to_string()))?;
            let y_init = conditioning_window(&args, params.order)?;
            let traj = simulate_traj(&params, args.x0, &y_init, args.length, args.seed)
                .map_err(|e| CliError::fit(e.to_string()))?;
            writeln!(out, "index,value,regime").map_err(|e| CliError::parse(e.to_string()))?;
            for k in 0..args.length {
                writeln!(
                    out,
                    "{},{:.17e},{}",
                    k + 1,
                    traj.observations[k],
                    traj.regimes[k]
                )
                .map_err(|e| CliError::parse(e.to_string()))?;
            }
        }
        Family::Setar => {
            let setar = file
                .setar
                .ok_or_else(|| CliError::parse("file holds no threshold parameters"))?;
            let y_init = conditioning_window(&args, setar.order)?;
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
            let mut full = y_init;
            writeln!(out, "index,value,regime").map_err(|e| CliError::parse(e.to_string()))?;
            for k in 0..args.length {
                let lag = full[k + setar.order - setar.trans_lag];
                let x = usize::from(lag > setar.threshold);
                let mut mean = setar.beta[x][0];
                for l in 1..=setar.order {
                    mean += setar.beta[x][l] * full[k + setar.order - l];
                }
                let z: f64 = {
                    // Box-Muller keeps the dependency surface small here.
                    let (u1, u2): (f64, f64) = (rng.gen::<f64>().max(1e-300), rng.gen());
                    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                };
                let v = mean + setar.sigma[x] * z;
                full.push(v);
                writeln!(out, "{},{:.17e},{}", k + 1, v, x)
                    .map_err(|e| CliError::parse(e.to_string()))?;
            }
        }
        Family::Rainfall => {
            let json = file
                .rainfall
                .ok_or_else(|| CliError::parse("file holds no rainfall parameters"))?;
            let params = json.to_params()?;
            params
                .validate()
                .map_err(|e| CliError::parse(e.to_string()))?;
            let data_path = args.data.as_ref().ok_or_else(|| {
                CliError::parse("rainfall simulation needs --data for the covariate path")
            })?;
            let series = read_series(data_path)?;
            if series.covariates.is_empty() {
                return Err(CliError::parse("data file has no z* covariate columns"));
            }
            let t = args.length.min(series.covariates.len());
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
            let (regimes, rain) = params
                .simulate_given_covariates(args.x0, &series.covariates[..t], &mut rng)
                .map_err(|e| CliError::fit(e.to_string()))?;
            let z_names = series.covariate_names.join(",");
            let r_names: Vec<String> = if series.station_names.len() == params.num_stations {
                series.station_names.clone()
            } else {
                (0..params.num_stations).map(|i| format!("r{}", i + 1)).collect()
            };
            writeln!(out, "index,value,{},{},regime", z_names, r_names.join(","))
                .map_err(|e| CliError::parse(e.to_string()))?;
            for k in 0..t {
                let z_str: Vec<String> = series.covariates[k]
                    .iter()
                    .map(|v| format!("{v:.17e}"))
                    .collect();
                let r_str: Vec<String> = rain[k].iter().map(|v| format!("{v:.17e}")).collect();
                writeln!(
                    out,
                    "{},{:.17e},{},{},{}",
                    k + 1,
                    rain[k].sum(),
                    z_str.join(","),
                    r_str.join(","),
                    regimes[k]
                )
                .map_err(|e| CliError::parse(e.to_string()))?;
            }
        }
    }
    Ok(())
}

fn conditioning_window(args: &SimulateArgs, s: usize) -> Result<Vec<f64>, CliError> {
    match &args.data {
        Some(path) => {
            let series = read_series(path)?;
            let y = apply_transform(args.transform, &series.value)?;
            if y.len() < s {
                return Err(CliError::parse("data file shorter than the order"));
            }
            Ok(y[..s].to_vec())
        }
        None => Ok(vec![0.0; s]),
    }
}

pub fn bootstrap(args: BootstrapArgs) -> Result<(), CliError> {
    let file = read_params(&args.params)?;
    let config = file
        .config
        .clone()
        .ok_or_else(|| CliError::parse("fit report carries no configuration"))?;
    let meta = file
        .fit
        .clone()
        .ok_or_else(|| CliError::parse("fit report carries no fit metadata"))?;
    if !matches!(file.family, Family::Nhmsar | Family::Msar) {
        return Err(CliError::parse(
            "bootstrap supports the autoregressive families",
        ));
    }
    if !meta.converged {
        return Err(CliError::fit("refusing to bootstrap a non-converged fit"));
    }
    let params = file
        .gaussian
        .clone()
        .ok_or_else(|| CliError::parse("file holds no autoregressive parameters"))?;

    let series = read_series(&args.data)?;
    let transform = match config.transform.as_str() {
        "log10" => Transform::Log10,
        _ => Transform::None,
    };
    let y = apply_transform(transform, &series.value)?;
    let (y_init, obs) = y.split_at(config.s);
    let mode = match config.constraint.as_deref() {
        Some("theta-prime") => ConstraintMode::ThetaPrime,
        Some("homogeneous") => ConstraintMode::Homogeneous {
            pi0: config.pi_fixed,
        },
        _ => ConstraintMode::ThetaDoublePrime {
            pi0: config.pi_fixed,
        },
    };
    let mut model = GaussianArEm::new(
        y_init.to_vec(),
        obs.to_vec(),
        config.m,
        config.s,
        config.r,
        mode,
    );
    model.x0 = config.x0;
    let em_cfg = EmConfig {
        max_iters: config.max_iter,
        tol: config.tol,
        ..EmConfig::default()
    };
    let fitted = FitReport {
        params,
        log_likelihood: meta.log_likelihood,
        loglik_trace: meta.loglik_trace.clone(),
        converged: meta.converged,
        iterations: meta.iterations,
        restart_index: meta.restart_index,
        aic: meta.aic,
        bic: meta.bic,
        npar: meta.npar,
        n_obs: meta.n_obs,
    };
    let report = parametric_bootstrap(
        &model,
        &fitted,
        args.replicates,
        args.starts,
        args.seed,
        &em_cfg,
    )
    .map_err(|e| CliError::fit(e.to_string()))?;

    #[derive(Serialize)]
    struct BootstrapOut {
        schema: String,
        seed: u64,
        n_replicates: usize,
        refit_starts: usize,
        failures: usize,
        config: FitConfigJson,
        names: Vec<String>,
        point: Vec<f64>,
        ci_lower: Vec<f64>,
        ci_upper: Vec<f64>,
        replicates: Vec<GaussianArParams>,
    }
    let point: Vec<f64> = model
        .flatten(&fitted.params)
        .into_iter()
        .map(|(_, v)| v)
        .collect();
    write_stable_json(
        &args.out,
        &BootstrapOut {
            schema: SCHEMA.into(),
            seed: args.seed,
            n_replicates: report.n_replicates,
            refit_starts: args.starts,
            failures: report.failures,
            config,
            names: report.names.clone(),
            point,
            ci_lower: report.ci_lower.clone(),
            ci_upper: report.ci_upper.clone(),
            replicates: report.replicates.clone(),
        },
    )?;
    Ok(())
}

pub fn stability(args: StabilityArgs) -> Result<(), CliError> {
    let file = read_params(&args.params)?;
    let params = file
        .gaussian
        .ok_or_else(|| CliError::parse("file holds no autoregressive parameters"))?;
    #[derive(Serialize)]
    struct StabilityOut {
        schema: String,
        basis_regime: usize,
        spectral_radii: Vec<f64>,
        defective_basis: bool,
        #[serde(skip_serializing_if = "Option::is_none")]
        eigenbasis_norms: Option<Vec<f64>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        uniform_contraction: Option<bool>,
        #[serde(skip_serializing_if = "Option::is_none")]
        mixture_contraction: Option<bool>,
    }
    let out = match stability_check(&params, args.basis_regime) {
        Ok(report) => StabilityOut {
            schema: SCHEMA.into(),
            basis_regime: report.basis_regime,
            spectral_radii: report.spectral_radii,
            defective_basis: false,
            eigenbasis_norms: Some(report.eigenbasis_norms),
            uniform_contraction: Some(report.uniform_contraction),
            mixture_contraction: Some(report.mixture_contraction),
        },
        Err(Error::DefectiveBasis {
            basis_regime,
            spectral_radii,
        }) => StabilityOut {
            schema: SCHEMA.into(),
            basis_regime,
            spectral_radii,
            defective_basis: true,
            eigenbasis_norms: None,
            uniform_contraction: None,
            mixture_contraction: None,
        },
        Err(e) => return Err(CliError::parse(e.to_string())),
    };
    write_stable_json(&args.out, &out)?;
    Ok(())
}

pub fn select(args: SelectArgs) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for path in &args.reports {
        let file = read_params(path)?;
        let meta = file.fit.ok_or_else(|| {
            CliError::parse(format!("{}: no fit metadata", path.display()))
        })?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| file.family.to_string());
        rows.push(FitSummary::new(
            name,
            meta.log_likelihood,
            meta.npar,
            meta.n_obs,
        ));
    }
    let table = model_select(rows).map_err(|e| CliError::parse(e.to_string()))?;

    let csv_path = args.out.with_extension("csv");
    let txt_path = args.out.with_extension("txt");
    let mut csv = String::from("model,log_likelihood,npar,n_obs,aic,bic,best_aic,best_bic\n");
    for (i, r) in table.rows.iter().enumerate() {
        csv.push_str(&format!(
            "{},{:.17e},{},{},{:.17e},{:.17e},{},{}\n",
            r.name,
            r.log_likelihood,
            r.npar,
            r.n_obs,
            r.aic,
            r.bic,
            i == table.best_aic,
            i == table.best_bic
        ));
    }
    fs::write(&csv_path, &csv)
        .map_err(|e| CliError::parse(format!("{}: {e}", csv_path.display())))?;

    let mut txt = format!(
        "{:<16} {:>12} {:>6} {:>7} {:>10} {:>10}\n",
        "model", "loglik", "npar", "n_obs", "AIC", "BIC"
    );
    for (i, r) in table.rows.iter().enumerate() {
        let mark_a = if i == table.best_aic { "*" } else { " " };
        let mark_b = if i == table.best_bic { "*" } else { " " };
        txt.push_str(&format!(
            "{:<16} {:>12.4} {:>6} {:>7} {:>9.4}{} {:>9.4}{}\n",
            r.name, r.log_likelihood, r.npar, r.n_obs, r.aic, mark_a, r.bic, mark_b
        ));
    }
    txt.push_str("(* = best by that criterion)\n");
    fs::write(&txt_path, &txt)
        .map_err(|e| CliError::parse(format!("{}: {e}", txt_path.display())))?;
    print!("{txt}");
    Ok(())
}
