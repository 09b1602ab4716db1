//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line with the measured quantities.
//!
//! Run with `cargo test -p nhmsar --test acceptance -- --nocapture` to see
//! every line.

use std::time::Instant;

use approx::assert_abs_diff_eq;
use ndarray::Array1;
use nhmsar::estimation::{
    consistency_experiment, em_fit, model_select, multi_start_fit, EmConfig, EmModel, FitSummary,
    GaussianArEm,
};
use nhmsar::gaussian_ar::{
    canonicalize, companion_matrix, fit_setar, stability_check, transition_q_grad,
    transition_q_value, ConstraintMode, GaussianArParams,
};
use nhmsar::rainfall::non_identifiable_pair;
use nhmsar::{attained_transition_bounds, brute_force_loglik, filter_forgetting, forward_filter};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pass(n: usize, name: &str, detail: String) {
    println!("acceptance {n} ({name}): PASS — {detail}");
}

fn fail(n: usize, name: &str, detail: String) -> ! {
    println!("acceptance {n} ({name}): FAIL — {detail}");
    panic!("acceptance criterion {n} failed: {detail}");
}

fn lynx_log10() -> Vec<f64> {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../data/lynx.csv"
    ))
    .expect("bundled lynx data");
    text.lines()
        .skip(1)
        .map(|l| {
            l.split(',')
                .nth(1)
                .unwrap()
                .parse::<f64>()
                .unwrap()
                .log10()
        })
        .collect()
}

fn random_ar_params(rng: &mut ChaCha8Rng, m: usize, s: usize, pi_floor: f64) -> GaussianArParams {
    GaussianArParams {
        order: s,
        trans_lag: 1 + rng.gen_range(0..s),
        num_regimes: m,
        beta: (0..m)
            .map(|_| {
                let mut b = vec![rng.gen_range(-0.5..0.5)];
                for _ in 0..s {
                    b.push(rng.gen_range(-0.6..0.6));
                }
                b
            })
            .collect(),
        sigma: (0..m).map(|_| rng.gen_range(0.1..1.0)).collect(),
        pi_minus: (0..m).map(|_| rng.gen_range(pi_floor..0.3)).collect(),
        pi_plus: (0..m).map(|_| rng.gen_range(pi_floor..0.3)).collect(),
        lambda0: (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        lambda1: (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect(),
    }
}

/// 1. Forward-filter log-likelihood equals exhaustive path enumeration on
///    100 random two-regime instances (s <= 2, T <= 10) within 1e-10.
#[test]
fn criterion_1_filter_matches_enumeration() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let s = 1 + (i % 2);
        let params = random_ar_params(&mut rng, 2, s, 0.05);
        let y_init: Vec<f64> = (0..s).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let t = 2 + rng.gen_range(0..9);
        let y: Vec<f64> = (0..t).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x0 = rng.gen_range(0..2);
        let filt = forward_filter(&params, x0, &y_init, &y).unwrap();
        let oracle = brute_force_loglik(&params, x0, &y_init, &y).unwrap();
        worst = worst.max((filt.log_likelihood - oracle).abs());
    }
    let elapsed = t0.elapsed();
    if worst > 1e-10 || elapsed.as_secs_f64() >= 10.0 {
        fail(
            1,
            "oracle equivalence",
            format!("max |filter − enumeration| = {worst:.3e}, elapsed {elapsed:?}"),
        );
    }
    pass(
        1,
        "oracle equivalence",
        format!("max |filter − enumeration| = {worst:.3e} over 100 instances in {elapsed:?}"),
    );
}

/// 2. Every EM iteration increases the log-likelihood (within -1e-9) on 20
///    simulated instances of length 500.
#[test]
fn criterion_2_em_ascent() {
    let t0 = Instant::now();
    let cfg = EmConfig::default();
    let mut worst_drop = 0.0f64;
    let mut total_iters = 0usize;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
        let mut truth = random_ar_params(&mut rng, 2, 1, 0.08);
        // Keep the generating model comfortably stable and distinct.
        truth.beta[0][1] = rng.gen_range(-0.7..0.0);
        truth.beta[1][1] = rng.gen_range(0.0..0.7);
        truth.beta[0][0] = -1.0;
        truth.beta[1][0] = 1.0;
        let traj = nhmsar::simulate(&truth, 0, &[0.0], 601, 4000 + seed).unwrap();
        let y = &traj.observations[100..];
        let model = GaussianArEm::new(
            y[..1].to_vec(),
            y[1..].to_vec(),
            2,
            1,
            1,
            ConstraintMode::ThetaDoublePrime { pi0: 0.08 },
        );
        let fit = em_fit(&model, model.moment_start().unwrap(), &cfg).unwrap();
        for w in fit.loglik_trace.windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
        total_iters += fit.iterations;
    }
    let elapsed = t0.elapsed();
    if worst_drop > 1e-9 || elapsed.as_secs_f64() >= 120.0 {
        fail(
            2,
            "EM ascent",
            format!("worst per-iteration drop {worst_drop:.3e}, elapsed {elapsed:?}"),
        );
    }
    pass(
        2,
        "EM ascent",
        format!(
            "worst per-iteration drop {worst_drop:.3e} over {total_iters} iterations in {elapsed:?}"
        ),
    );
}

struct LynxFits {
    nhms: nhmsar::estimation::FitReport<GaussianArParams>,
    msar: nhmsar::estimation::FitReport<GaussianArParams>,
    setar_summary: FitSummary,
    msar_summary: FitSummary,
    nhms_summary: FitSummary,
}

fn fit_lynx() -> LynxFits {
    let y = lynx_log10();
    let (y_init, obs) = y.split_at(2);
    let pi0 = 2f64.powi(-52);
    let cfg = EmConfig::default();

    let setar = fit_setar(y_init, obs, 2, 2).unwrap();
    let setar_summary = FitSummary::new("setar", setar.log_likelihood, setar.npar, setar.n_obs);

    let msar_model = GaussianArEm::new(
        y_init.to_vec(),
        obs.to_vec(),
        2,
        2,
        2,
        ConstraintMode::Homogeneous { pi0 },
    );
    let msar = multi_start_fit(&msar_model, 20, 1, &cfg).unwrap();
    let msar_summary = FitSummary::new("msar", msar.log_likelihood, msar.npar, msar.n_obs);

    let nhms_model = GaussianArEm::new(
        y_init.to_vec(),
        obs.to_vec(),
        2,
        2,
        2,
        ConstraintMode::ThetaDoublePrime { pi0 },
    );
    let nhms = multi_start_fit(&nhms_model, 20, 1, &cfg).unwrap();
    let nhms_summary = FitSummary::new("nhmsar", nhms.log_likelihood, nhms.npar, nhms.n_obs);

    LynxFits {
        nhms,
        msar,
        setar_summary,
        msar_summary,
        nhms_summary,
    }
}

/// 3. Lynx information criteria: the observation-driven fit reaches
///    AIC <= -28 with 20 starts; the homogeneous fit lands within +-2 of the
///    published -0.21; both rankings are reproduced (AIC prefers the
///    observation-driven model, BIC the threshold model, the homogeneous
///    model last on both).
#[test]
fn criterion_3_lynx_information_criteria() {
    let t0 = Instant::now();
    let fits = fit_lynx();
    let (setar, msar, nhms) = (
        &fits.setar_summary,
        &fits.msar_summary,
        &fits.nhms_summary,
    );
    let elapsed = t0.elapsed();
    let detail = format!(
        "AIC: nhmsar {:.2}, setar {:.2}, msar {:.2}; BIC: setar {:.2}, nhmsar {:.2}, msar {:.2}; elapsed {elapsed:?}",
        nhms.aic, setar.aic, msar.aic, setar.bic, nhms.bic, msar.bic
    );
    let mut problems = Vec::new();
    if !(nhms.aic <= -28.0) {
        problems.push(format!("nhmsar AIC {:.2} above -28", nhms.aic));
    }
    if !((msar.aic - -0.21).abs() <= 2.0) {
        problems.push(format!(
            "msar AIC {:.2} outside -0.21 ± 2 (fitted optimum is better than the published value; \
             its log-likelihood {:.2} is the best of several EM basins, none of which sits near \
             the published one)",
            msar.aic, fits.msar.log_likelihood
        ));
    }
    if !(nhms.aic < setar.aic && setar.aic < msar.aic) {
        problems.push("AIC ordering nhmsar < setar < msar violated".into());
    }
    if !(setar.bic < nhms.bic && nhms.bic < msar.bic) {
        problems.push("BIC ordering setar < nhmsar < msar violated".into());
    }
    let ordering_ok = problems.iter().all(|p| p.contains("msar AIC"));
    if elapsed.as_secs_f64() >= 300.0 {
        problems.push(format!("runtime budget exceeded: {elapsed:?}"));
    }
    if problems.is_empty() {
        pass(3, "lynx criteria", detail);
    } else {
        println!(
            "acceptance 3 (lynx criteria): partial — orderings {}; {detail}",
            if ordering_ok { "hold" } else { "violated" }
        );
        fail(3, "lynx criteria", problems.join("; "));
    }
}

/// 4. The best lynx fit's regime-aligned coefficients fall inside the
///    published 95% intervals.
#[test]
fn criterion_4_lynx_coefficients_inside_published_intervals() {
    let t0 = Instant::now();
    let fits = fit_lynx();
    let (canon, _) = canonicalize(&fits.nhms.params);
    // Published intervals, low-noise regime first.
    let checks = [
        ("beta0_1", canon.beta[0][0], 0.31, 0.80),
        ("beta1_1", canon.beta[0][1], 0.96, 1.27),
        ("beta2_1", canon.beta[0][2], -0.43, -0.05),
        ("sigma_1", canon.sigma[0], 0.11, 0.17),
        ("beta0_2", canon.beta[1][0], -0.12, 1.86),
        ("beta1_2", canon.beta[1][1], 1.23, 1.69),
        ("beta2_2", canon.beta[1][2], -1.20, -0.39),
        ("sigma_2", canon.sigma[1], 0.14, 0.26),
    ];
    let mut bad = Vec::new();
    for (name, value, lo, hi) in checks {
        if !(lo < value && value < hi) {
            bad.push(format!("{name} = {value:.4} outside ({lo}, {hi})"));
        }
    }
    if !bad.is_empty() {
        fail(4, "lynx coefficients", bad.join("; "));
    }
    pass(
        4,
        "lynx coefficients",
        format!(
            "all 8 coefficients inside the published intervals (beta1_1 = {:.3}, sigma_1 = {:.3}); elapsed {:?}",
            canon.beta[0][1],
            canon.sigma[0],
            t0.elapsed()
        ),
    );
}

/// 5. Stability report on the published lynx parameters: spectral radii match
///    the quadratic-root oracle within 1e-3 and every regime contracts in the
///    second regime's eigenbasis.
#[test]
fn criterion_5_stability_of_published_parameters() {
    let t0 = Instant::now();
    let pi0 = 2f64.powi(-52);
    let params = GaussianArParams {
        order: 2,
        trans_lag: 2,
        num_regimes: 2,
        beta: vec![vec![0.54, 1.11, -0.24], vec![1.03, 1.49, -0.87]],
        sigma: vec![0.14, 0.22],
        pi_minus: vec![pi0; 2],
        pi_plus: vec![pi0; 2],
        lambda0: vec![-42.4, 9.07],
        lambda1: vec![12.8, -3.33],
    };
    // Independent root oracle: |z| for z^2 - b1 z - b2 via the quadratic
    // formula.
    let quad_radius = |b1: f64, b2: f64| -> f64 {
        let disc = b1 * b1 + 4.0 * b2;
        if disc >= 0.0 {
            let r1 = 0.5 * (b1 + disc.sqrt());
            let r2 = 0.5 * (b1 - disc.sqrt());
            r1.abs().max(r2.abs())
        } else {
            // complex pair, modulus sqrt(-b2)
            (-b2).sqrt()
        }
    };
    let oracle = [quad_radius(1.11, -0.24), quad_radius(1.49, -0.87)];
    let report = stability_check(&params, 1).unwrap();
    let gaps: Vec<f64> = report
        .spectral_radii
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let elapsed = t0.elapsed();
    if gaps.iter().any(|&g| g > 1e-3) || !report.uniform_contraction {
        fail(
            5,
            "stability",
            format!(
                "radii {:?} vs oracle {:?}, uniform contraction {}",
                report.spectral_radii, oracle, report.uniform_contraction
            ),
        );
    }
    assert!(elapsed.as_secs_f64() < 1.0);
    // The companion layout itself: top-right identity block, coefficients in
    // the last row, highest lag first.
    let c = companion_matrix(&params, 0);
    assert_abs_diff_eq!(c[0][1], 1.0);
    assert_abs_diff_eq!(c[1][0], -0.24);
    assert_abs_diff_eq!(c[1][1], 1.11);
    pass(
        5,
        "stability",
        format!(
            "spectral radii ({:.4}, {:.4}) within 1e-3 of the root oracle, all eigenbasis norms < 1 ({:?})",
            report.spectral_radii[0], report.spectral_radii[1], elapsed
        ),
    );
}

/// 6. Filters started from different regimes merge at least geometrically:
///    d_k <= rho^k with rho from the attained transition bounds, on 50
///    random models (floors >= 0.1) and random data of length 200.
#[test]
fn criterion_6_forgetting_bound() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6001);
    let mut worst_margin = f64::NEG_INFINITY;
    for _ in 0..50 {
        let params = random_ar_params(&mut rng, 2, 1, 0.1);
        let y_init = vec![rng.gen_range(-2.0..2.0)];
        let y: Vec<f64> = (0..200).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let forget = filter_forgetting(&params, &y_init, &y, 0, 1).unwrap();
        let (lo, hi) = attained_transition_bounds(&params, &y_init, &y).unwrap();
        let rho = 1.0 - lo / hi;
        for (k, &d) in forget.tv.iter().enumerate() {
            let bound = rho.powi(k as i32 + 1);
            worst_margin = worst_margin.max(d - bound);
        }
    }
    let elapsed = t0.elapsed();
    if worst_margin > 1e-12 || elapsed.as_secs_f64() >= 30.0 {
        fail(
            6,
            "forgetting bound",
            format!("worst d_k − rho^k = {worst_margin:.3e}, elapsed {elapsed:?}"),
        );
    }
    pass(
        6,
        "forgetting bound",
        format!("worst d_k − rho^k = {worst_margin:.3e} over 50 models in {elapsed:?}"),
    );
}

/// 7. The two rainfall parameter vectors built to share a stationary law
///    give identical stationary likelihoods (within 1e-10) on 50 random
///    rainfall records, while their canonical forms differ.
#[test]
fn criterion_7_equal_law_pair() {
    let t0 = Instant::now();
    let (a1, a2) = non_identifiable_pair();
    let mut rng = ChaCha8Rng::seed_from_u64(7001);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let t = 1 + rng.gen_range(0..20);
        let rain: Vec<Array1<f64>> = (0..t)
            .map(|_| {
                let draw = |rng: &mut ChaCha8Rng| {
                    if rng.gen::<f64>() < 0.5 {
                        0.0
                    } else {
                        -(rng.gen::<f64>().max(1e-12)).ln()
                    }
                };
                ndarray::array![draw(&mut rng), draw(&mut rng)]
            })
            .collect();
        let l1 = a1.stationary_loglik(&rain).unwrap();
        let l2 = a2.stationary_loglik(&rain).unwrap();
        worst = worst.max((l1 - l2).abs());
    }
    let (c1, _, _) = nhmsar::rainfall::canonicalize_rainfall(&a1);
    let (c2, _, _) = nhmsar::rainfall::canonicalize_rainfall(&a2);
    let elapsed = t0.elapsed();
    if worst > 1e-10 || c1 == c2 || elapsed.as_secs_f64() >= 5.0 {
        fail(
            7,
            "equal-law pair",
            format!(
                "max likelihood gap {worst:.3e}, canonical forms equal: {}, elapsed {elapsed:?}",
                c1 == c2
            ),
        );
    }
    pass(
        7,
        "equal-law pair",
        format!("max stationary likelihood gap {worst:.3e}; canonical forms differ ({elapsed:?})"),
    );
}

/// 8. Consistency: on a well-separated stable design, the median distance to
///    the truth (up to relabeling) over 20 replications is non-increasing
///    across n in {250, 1000, 4000} and at most 0.1 at n = 4000.
#[test]
fn criterion_8_consistency() {
    let t0 = Instant::now();
    let pi0 = 0.05;
    let truth = GaussianArParams {
        order: 1,
        trans_lag: 1,
        num_regimes: 2,
        beta: vec![vec![0.0, 0.85], vec![0.0, -0.85]],
        sigma: vec![0.5, 0.5],
        pi_minus: vec![pi0; 2],
        pi_plus: vec![pi0; 2],
        lambda0: vec![0.0, 0.0],
        lambda1: vec![0.6, -0.6],
    };
    let cells = consistency_experiment(
        &truth,
        ConstraintMode::ThetaDoublePrime { pi0 },
        &[250, 1000, 4000],
        20,
        3,
        2024,
        &EmConfig::default(),
    )
    .unwrap();
    let medians: Vec<f64> = cells.iter().map(|c| c.median_distance).collect();
    let elapsed = t0.elapsed();
    let detail = format!(
        "medians {:.4} / {:.4} / {:.4} at n = 250 / 1000 / 4000, failures {:?}, elapsed {elapsed:?}",
        medians[0],
        medians[1],
        medians[2],
        cells.iter().map(|c| c.failures).collect::<Vec<_>>()
    );
    let monotone = medians[0] >= medians[1] && medians[1] >= medians[2];
    if !monotone || !(medians[2] <= 0.1) || elapsed.as_secs_f64() >= 1800.0 {
        fail(8, "consistency", detail);
    }
    pass(8, "consistency", detail);
}

/// 9. The weighted Gamma update beats a 200 x 200 grid over
///    (shape, rate) in [0.1, 10]^2 within 1e-6 in objective on 20 random
///    weighted datasets.
#[test]
fn criterion_9_gamma_update_vs_grid() {
    use nhmsar::rainfall::{m_step_gamma, weighted_gamma_loglik};
    use rand_distr::{Distribution, Gamma};
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9001);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let shape = rng.gen_range(0.4..3.0);
        let rate = rng.gen_range(0.3..3.0);
        let gamma = Gamma::new(shape, 1.0 / rate).unwrap();
        let n = 150;
        let rain: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen::<f64>() < 0.8 {
                    gamma.sample(&mut rng)
                } else {
                    0.0
                }
            })
            .collect();
        let weights: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.01).collect();
        let (_, alpha, beta) = m_step_gamma(&weights, &rain, 1.0, 1.0).unwrap();
        let fitted = weighted_gamma_loglik(&weights, &rain, alpha, beta);
        let mut best_grid = f64::NEG_INFINITY;
        for i in 0..200 {
            for j in 0..200 {
                let a = 0.1 + 9.9 * (i as f64 + 0.5) / 200.0;
                let b = 0.1 + 9.9 * (j as f64 + 0.5) / 200.0;
                best_grid = best_grid.max(weighted_gamma_loglik(&weights, &rain, a, b));
            }
        }
        worst = worst.max(best_grid - fitted);
    }
    let elapsed = t0.elapsed();
    if worst > 1e-6 || elapsed.as_secs_f64() >= 60.0 {
        fail(
            9,
            "gamma update vs grid",
            format!("worst grid − fitted objective gap {worst:.3e}, elapsed {elapsed:?}"),
        );
    }
    pass(
        9,
        "gamma update vs grid",
        format!("grid never beats the update by more than {worst:.3e} ({elapsed:?})"),
    );
}

/// 10. Analytic gradients of both transition objectives match central finite
///     differences within 1e-5 relative at 20 random points each.
#[test]
fn criterion_10_transition_gradients() {
    use nhmsar::rainfall::{kernel_q_grad, kernel_q_value};
    let t0 = Instant::now();

    // Logistic family, all three constraint modes cycled over 20 points.
    let mut rng = ChaCha8Rng::seed_from_u64(10_001);
    let t = 40;
    let stay_w: Vec<f64> = (0..t).map(|_| rng.gen::<f64>()).collect();
    let leave_w: Vec<f64> = (0..t).map(|_| rng.gen::<f64>()).collect();
    let cov: Vec<f64> = (0..t).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let mut worst_logistic = 0.0f64;
    for i in 0..20 {
        let mode = match i % 3 {
            0 => ConstraintMode::ThetaPrime,
            1 => ConstraintMode::ThetaDoublePrime { pi0: 0.05 },
            _ => ConstraintMode::Homogeneous { pi0: 0.05 },
        };
        let dim = match mode {
            ConstraintMode::ThetaPrime => 4,
            ConstraintMode::ThetaDoublePrime { .. } => 2,
            ConstraintMode::Homogeneous { .. } => 1,
        };
        let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let grad = transition_q_grad(&p, mode, &stay_w, &leave_w, &cov);
        for j in 0..dim {
            let h = 1e-6;
            let mut pp = p.clone();
            pp[j] += h;
            let mut pm = p.clone();
            pm[j] -= h;
            let fd = (transition_q_value(&pp, mode, &stay_w, &leave_w, &cov)
                - transition_q_value(&pm, mode, &stay_w, &leave_w, &cov))
                / (2.0 * h);
            let rel = (grad[j] - fd).abs() / fd.abs().max(grad[j].abs()).max(1e-8);
            worst_logistic = worst_logistic.max(rel);
        }
    }

    // Kernel family, 20 random points with a 3-regime, 2-covariate row.
    let mut rng = ChaCha8Rng::seed_from_u64(10_002);
    let (m, d) = (3, 2);
    let xi_row: Vec<Vec<f64>> = (0..25)
        .map(|_| (0..m).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let z: Vec<Array1<f64>> = (0..25)
        .map(|_| ndarray::array![rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)])
        .collect();
    let chol = nhmsar::linalg::cholesky(&[vec![1.0, 0.3], vec![0.3, 0.7]]).unwrap();
    let dim = (m - 1) + m * d;
    let mut worst_kernel = 0.0f64;
    for _ in 0..20 {
        let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let grad = kernel_q_grad(&p, &xi_row, &z, &chol);
        for j in 0..dim {
            let h = 1e-6;
            let mut pp = p.clone();
            pp[j] += h;
            let mut pm = p.clone();
            pm[j] -= h;
            let fd = (kernel_q_value(&pp, &xi_row, &z, &chol)
                - kernel_q_value(&pm, &xi_row, &z, &chol))
                / (2.0 * h);
            let rel = (grad[j] - fd).abs() / fd.abs().max(grad[j].abs()).max(1e-8);
            worst_kernel = worst_kernel.max(rel);
        }
    }
    let elapsed = t0.elapsed();
    if worst_logistic > 1e-5 || worst_kernel > 1e-5 || elapsed.as_secs_f64() >= 30.0 {
        fail(
            10,
            "transition gradients",
            format!(
                "worst relative gap: logistic {worst_logistic:.3e}, kernel {worst_kernel:.3e}, elapsed {elapsed:?}"
            ),
        );
    }
    pass(
        10,
        "transition gradients",
        format!(
            "worst relative gap: logistic {worst_logistic:.3e}, kernel {worst_kernel:.3e} ({elapsed:?})"
        ),
    );
}

/// The published-parameter model spends less time in the second (high-noise,
/// decreasing) regime than in the first, and simulation is reproducible.
#[test]
fn lynx_simulation_sojourns() {
    let pi0 = 2f64.powi(-52);
    let params = GaussianArParams {
        order: 2,
        trans_lag: 2,
        num_regimes: 2,
        beta: vec![vec![0.54, 1.11, -0.24], vec![1.03, 1.49, -0.87]],
        sigma: vec![0.14, 0.22],
        pi_minus: vec![pi0; 2],
        pi_plus: vec![pi0; 2],
        lambda0: vec![-42.4, 9.07],
        lambda1: vec![12.8, -3.33],
    };
    let y = lynx_log10();
    let traj = nhmsar::simulate(&params, 0, &y[..2], 5000, 11).unwrap();
    let mut sojourns = [Vec::new(), Vec::new()];
    let mut run = 1usize;
    for k in 1..traj.regimes.len() {
        if traj.regimes[k] == traj.regimes[k - 1] {
            run += 1;
        } else {
            sojourns[traj.regimes[k - 1]].push(run as f64);
            run = 1;
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m0, m1) = (mean(&sojourns[0]), mean(&sojourns[1]));
    assert!(
        m1 < m0,
        "regime 2 sojourn {m1:.2} should be shorter than regime 1 sojourn {m0:.2}"
    );
    // Simulated trajectories stay on the data's scale (cyclic, bounded).
    let max = traj
        .observations
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let min = traj.observations.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(max < 6.0 && min > 0.0, "simulation escaped ({min:.2}, {max:.2})");
}

/// Model selection over the three lynx fits reproduces the published
/// preference pattern.
#[test]
fn lynx_selection_table() {
    let fits = fit_lynx();
    let table = model_select(vec![
        fits.setar_summary.clone(),
        fits.msar_summary.clone(),
        fits.nhms_summary.clone(),
    ])
    .unwrap();
    assert_eq!(table.rows[table.best_aic].name, "nhmsar");
    assert_eq!(table.rows[table.best_bic].name, "setar");
    // Stored criteria match their defining formulas exactly.
    for row in &table.rows {
        assert_eq!(row.aic, -2.0 * row.log_likelihood + 2.0 * row.npar as f64);
        assert_eq!(
            row.bic,
            -2.0 * row.log_likelihood + row.npar as f64 * (row.n_obs as f64).ln()
        );
    }
}
