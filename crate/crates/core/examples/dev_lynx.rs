// Dev scratch: lynx pipeline calibration. Deleted before release if not useful.
use nhmsar::estimation::{multi_start_fit, model_select, EmConfig, FitSummary, GaussianArEm};
use nhmsar::gaussian_ar::{canonicalize, fit_setar, stability_check, ConstraintMode};

fn main() {
    let raw: Vec<f64> = std::fs::read_to_string("crates/cli/data/lynx.csv")
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
        .collect();
    let y: Vec<f64> = raw.iter().map(|v| v.log10()).collect();
    let (y_init, obs) = y.split_at(2);
    println!("T = {}", obs.len());

    let t0 = std::time::Instant::now();
    let setar = fit_setar(y_init, obs, 2, 2).unwrap();
    println!(
        "SETAR: threshold {:.4} beta {:?} sigma {:?} ll {:.4} npar {} ({:?})",
        setar.threshold, setar.beta, setar.sigma, setar.log_likelihood, setar.npar, t0.elapsed()
    );
    let setar_sum = FitSummary::new("setar", setar.log_likelihood, setar.npar, setar.n_obs);
    println!("SETAR AIC {:.4} BIC {:.4}", setar_sum.aic, setar_sum.bic);

    let cfg = EmConfig::default();
    let pi0 = 2f64.powi(-52);

    let t0 = std::time::Instant::now();
    let msar = GaussianArEm::new(
        y_init.to_vec(),
        obs.to_vec(),
        2,
        2,
        2,
        ConstraintMode::Homogeneous { pi0 },
    );
    let msar_fit = multi_start_fit(&msar, 20, 1, &cfg).unwrap();
    println!(
        "MS-AR: ll {:.4} AIC {:.4} BIC {:.4} npar {} iters {} restart {} ({:?})",
        msar_fit.log_likelihood,
        msar_fit.aic,
        msar_fit.bic,
        msar_fit.npar,
        msar_fit.iterations,
        msar_fit.restart_index,
        t0.elapsed()
    );
    {
        let p = &msar_fit.params;
        println!("  msar sigma {:?}", p.sigma);
        println!("  msar beta {:?}", p.beta);
        let stay: Vec<f64> = (0..2).map(|x| p.stay_prob(x, 0.0)).collect();
        println!("  msar stay {:?}", stay);
        // occupancy
        use nhmsar::{backward_smooth, forward_filter};
        let f = forward_filter(p, 0, y_init, obs).unwrap();
        let sm = backward_smooth(p, &f, y_init, obs).unwrap();
        let occ: Vec<f64> = (0..2).map(|x| sm.gamma.column(x).sum()).collect();
        println!("  msar occupancy {occ:?}");
        // single-start fit from the moment start
        use nhmsar::estimation::EmModel;
        let single = nhmsar::estimation::em_fit(&msar, msar.moment_start().unwrap(), &cfg);
        if let Ok(s1) = single {
            println!("  msar single-start ll {:.4} aic {:.4}", s1.log_likelihood, s1.aic);
        }
        // Neutral homogeneous init: pooled OLS in both regimes with a small
        // intercept offset, sticky chain.
        let d = 3;
        let mut xtx = vec![vec![0.0; d]; d];
        let mut xty = vec![0.0; d];
        let full: Vec<f64> = y_init.iter().chain(obs.iter()).cloned().collect();
        for k in 0..obs.len() {
            let row = [1.0, full[k + 1], full[k]];
            for i in 0..d {
                for j in 0..d {
                    xtx[i][j] += row[i] * row[j];
                }
                xty[i] += row[i] * obs[k];
            }
        }
        let bet = nhmsar::linalg::spd_solve(&xtx, &xty, 1e-12).unwrap();
        let mut sse = 0.0;
        for k in 0..obs.len() {
            let fit = bet[0] + bet[1] * full[k + 1] + bet[2] * full[k];
            sse += (obs[k] - fit) * (obs[k] - fit);
        }
        let sd = (sse / obs.len() as f64).sqrt();
        println!("  pooled OLS beta {bet:?} sd {sd:.4}");
        // Survey converged log-likelihoods from many random inits.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let mut lls: Vec<f64> = Vec::new();
        for _ in 0..200 {
            let base = msar.moment_start().unwrap();
            let mut init = base.clone();
            for x in 0..2 {
                for b in init.beta[x].iter_mut() {
                    *b = rng.gen_range(-1.5..1.5);
                }
                init.sigma[x] = rng.gen_range(0.05..0.5);
                init.lambda0[x] = rng.gen_range(-3.0..3.0);
            }
            if let Ok(s1) = nhmsar::estimation::em_fit(&msar, init, &cfg) {
                if s1.log_likelihood.is_finite() {
                    lls.push(s1.log_likelihood);
                }
            }
        }
        lls.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!(
            "  msar 200 random inits: min {:.3} q25 {:.3} median {:.3} max {:.3}",
            lls[0],
            lls[lls.len() / 4],
            lls[lls.len() / 2],
            lls[lls.len() - 1]
        );
        println!(
            "  lls below 15: {:?}",
            lls.iter().filter(|&&v| v < 15.0).collect::<Vec<_>>()
        );
        let pi0v = 2f64.powi(-52);
        for (off, stay) in [(0.05, 0.9), (0.1, 0.9), (0.05, 0.7), (0.2, 0.8)] {
            let init = nhmsar::gaussian_ar::GaussianArParams {
                order: 2,
                trans_lag: 2,
                num_regimes: 2,
                beta: vec![
                    vec![bet[0] - off, bet[1], bet[2]],
                    vec![bet[0] + off, bet[1], bet[2]],
                ],
                sigma: vec![sd, sd],
                pi_minus: vec![pi0v; 2],
                pi_plus: vec![pi0v; 2],
                lambda0: vec![-(stay / (1.0f64 - stay)).ln(); 2],
                lambda1: vec![0.0; 2],
            };
            if let Ok(s1) = nhmsar::estimation::em_fit(&msar, init, &cfg) {
                println!(
                    "  msar neutral(off={off},stay={stay}) ll {:.4} aic {:.4} iters {}",
                    s1.log_likelihood, s1.aic, s1.iterations
                );
            }
        }
    }

    let t0 = std::time::Instant::now();
    let nhms = GaussianArEm::new(
        y_init.to_vec(),
        obs.to_vec(),
        2,
        2,
        2,
        ConstraintMode::ThetaDoublePrime { pi0 },
    );
    let nhms_fit = multi_start_fit(&nhms, 20, 1, &cfg).unwrap();
    println!(
        "NHMS-AR: ll {:.4} AIC {:.4} BIC {:.4} npar {} iters {} restart {} ({:?})",
        nhms_fit.log_likelihood,
        nhms_fit.aic,
        nhms_fit.bic,
        nhms_fit.npar,
        nhms_fit.iterations,
        nhms_fit.restart_index,
        t0.elapsed()
    );
    let (canon, _) = canonicalize(&nhms_fit.params);
    println!("beta0 {:?}", canon.beta[0]);
    println!("beta1 {:?}", canon.beta[1]);
    println!("sigma {:?}", canon.sigma);
    println!("lambda0 {:?} lambda1 {:?}", canon.lambda0, canon.lambda1);
    let report = stability_check(&canon, 1).unwrap();
    println!("stability: {report:?}");

    let table = model_select(vec![
        setar_sum,
        FitSummary::new("msar", msar_fit.log_likelihood, msar_fit.npar, msar_fit.n_obs),
        FitSummary::new("nhmsar", nhms_fit.log_likelihood, nhms_fit.npar, nhms_fit.n_obs),
    ])
    .unwrap();
    println!(
        "best AIC: {} best BIC: {}",
        table.rows[table.best_aic].name, table.rows[table.best_bic].name
    );
}
