// Dev scratch: profile one long EM fit.
use nhmsar::estimation::{em_fit, EmConfig, EmModel, GaussianArEm};
use nhmsar::gaussian_ar::{ConstraintMode, GaussianArParams};
use nhmsar::simulate;

fn main() {
    let truth = GaussianArParams {
        order: 1,
        trans_lag: 1,
        num_regimes: 2,
        beta: vec![vec![0.0, 0.5], vec![2.0, -0.4]],
        sigma: vec![0.3, 0.3],
        pi_minus: vec![0.1, 0.1],
        pi_plus: vec![0.1, 0.1],
        lambda0: vec![-2.0, 3.0],
        lambda1: vec![2.0, -3.0],
    };
    let traj = simulate(&truth, 0, &[0.0], 4201, 5).unwrap();
    let y = &traj.observations[200..];
    let model = GaussianArEm::new(
        y[..1].to_vec(),
        y[1..].to_vec(),
        2,
        1,
        1,
        ConstraintMode::ThetaDoublePrime { pi0: 0.1 },
    );
    let cfg = EmConfig::default();
    let t0 = std::time::Instant::now();
    let start = model.moment_start().unwrap();
    println!("moment start built {:?}", t0.elapsed());
    let t0 = std::time::Instant::now();
    let fit = em_fit(&model, start, &cfg).unwrap();
    println!(
        "em_fit: ll {:.3} iters {} converged {} in {:?} ({:?}/iter)",
        fit.log_likelihood,
        fit.iterations,
        fit.converged,
        t0.elapsed(),
        t0.elapsed() / fit.iterations as u32
    );
}
