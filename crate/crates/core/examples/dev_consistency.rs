// Dev scratch: calibrate the consistency experiment design.
use nhmsar::estimation::{consistency_experiment, EmConfig};
use nhmsar::gaussian_ar::{ConstraintMode, GaussianArParams};

fn design(ar: f64, sigma: f64, lambda1: f64, pi0: f64) -> GaussianArParams {
    GaussianArParams {
        order: 1,
        trans_lag: 1,
        num_regimes: 2,
        beta: vec![vec![0.0, ar], vec![0.0, -ar]],
        sigma: vec![sigma, sigma],
        pi_minus: vec![pi0, pi0],
        pi_plus: vec![pi0, pi0],
        lambda0: vec![0.0, 0.0],
        lambda1: vec![lambda1, -lambda1],
    }
}

fn main() {
    let cfg = EmConfig::default();
    for seed in [2024u64, 7, 99] {
        let (ar, sigma, lambda1, pi0) = (0.85, 0.5, 0.6, 0.05);
        let truth = design(ar, sigma, lambda1, pi0);
        let t0 = std::time::Instant::now();
        let cells = consistency_experiment(
            &truth,
            ConstraintMode::ThetaDoublePrime { pi0 },
            &[250, 1000, 4000],
            20,
            3,
            seed,
            &cfg,
        )
        .unwrap();
        println!("seed {seed}:");
        for c in &cells {
            println!(
                "ar {ar} sigma {sigma} l1 {lambda1} pi0 {pi0} | n {:5} median {:.4} q90 {:.4} fail {} ({:?})",
                c.n, c.median_distance, c.q90_distance, c.failures, t0.elapsed()
            );
        }
    }
}
