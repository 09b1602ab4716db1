// Dev scratch: per-component estimation errors at n = 4000.
use nhmsar::estimation::{multi_start_fit, EmConfig, GaussianArEm};
use nhmsar::gaussian_ar::{canonicalize, ConstraintMode, GaussianArParams};
use nhmsar::simulate;

fn main() {
    let pi0 = 0.1;
    let truth = GaussianArParams {
        order: 1,
        trans_lag: 1,
        num_regimes: 2,
        beta: vec![vec![-1.0, 0.5], vec![1.0, 0.5]],
        sigma: vec![0.35, 0.35],
        pi_minus: vec![pi0, pi0],
        pi_plus: vec![pi0, pi0],
        lambda0: vec![0.0, 0.0],
        lambda1: vec![1.2, -1.2],
    };
    let cfg = EmConfig::default();
    let (ct, _) = canonicalize(&truth);
    let flat_t = ct.flatten();
    let mut sums = std::collections::BTreeMap::<String, (f64, f64, usize)>::new();
    for rep in 0..16 {
        let traj = simulate(&truth, 0, &[0.0], 4201, 1000 + rep).unwrap();
        let y = &traj.observations[200..];
        let model = GaussianArEm::new(
            y[..1].to_vec(),
            y[1..].to_vec(),
            2,
            1,
            1,
            ConstraintMode::ThetaDoublePrime { pi0 },
        );
        let fit = multi_start_fit(&model, 3, 7 + rep, &cfg).unwrap();
        let (cf, _) = canonicalize(&fit.params);
        let flat_f = cf.flatten();
        let mut worst = (String::new(), 0.0f64);
        for ((name, a), (_, b)) in flat_f.iter().zip(&flat_t) {
            let d = (a - b).abs();
            if d > worst.1 {
                worst = (name.clone(), d);
            }
        }
        let errs: Vec<String> = flat_f
            .iter()
            .zip(&flat_t)
            .filter(|((n, _), _)| n.starts_with("lambda") || n.starts_with("beta0"))
            .map(|((n, a), (_, b))| format!("{n} {:+.3}", a - b))
            .collect();
        println!(
            "rep {rep}: worst {} {:.4} iters {} conv {} | {}",
            worst.0,
            worst.1,
            fit.iterations,
            fit.converged,
            errs.join(" ")
        );
        // align fit to truth directly for error stats
        use nhmsar::estimation::EmModel;
        let aligned = model.align_to(&fit.params, &truth);
        let ft = truth.flatten();
        for ((name, a), (_, b)) in aligned.flatten().iter().zip(&ft) {
            let e = a - b;
            let entry = sums.entry(name.clone()).or_insert((0.0, 0.0, 0));
            entry.0 += e;
            entry.1 += e * e;
            entry.2 += 1;
        }
    }
    println!("--- per-component bias / rmse over reps ---");
    for (name, (s1, s2, n)) in sums {
        let mean = s1 / n as f64;
        let rmse = (s2 / n as f64).sqrt();
        if rmse > 0.02 {
            println!("{name:12} bias {mean:+.4} rmse {rmse:.4}");
        }
    }
}
