//! Companion-matrix diagnostics: spectral radii, infinity norms in the
//! eigenbasis of a reference regime, and the two drift-style contraction
//! checks used to certify ergodicity of a fitted model.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complex_solve, monic_roots};

use super::GaussianArParams;

/// Stability summary for every regime's companion matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    /// Spectral radius of each regime's companion matrix.
    pub spectral_radii: Vec<f64>,
    /// Regime whose eigenvectors define the norm `|P^{-1} A P|_inf`.
    pub basis_regime: usize,
    /// That norm for each regime's companion matrix.
    pub eigenbasis_norms: Vec<f64>,
    /// All eigenbasis norms < 1: every regime contracts in the common basis.
    pub uniform_contraction: bool,
    /// Worst-case transition-weighted mixture of squared norms < 1 from every
    /// regime, with stay weights ranging over their attainable interval.
    pub mixture_contraction: bool,
}

/// The s x s companion matrix of regime `x`: identity on the superdiagonal
/// and the AR coefficients, highest lag first, in the last row.
pub fn companion_matrix(params: &GaussianArParams, x: usize) -> Vec<Vec<f64>> {
    let s = params.order;
    let mut m = vec![vec![0.0; s]; s];
    for i in 0..s.saturating_sub(1) {
        m[i][i + 1] = 1.0;
    }
    for j in 0..s {
        // last row: (beta_s, beta_{s-1}, ..., beta_1)
        m[s - 1][j] = params.beta[x][s - j];
    }
    m
}

/// Eigenvalues of the regime-`x` companion matrix: the roots of
/// `z^s - beta_1 z^{s-1} - ... - beta_s`.
pub fn companion_eigenvalues(params: &GaussianArParams, x: usize) -> Vec<Complex64> {
    let s = params.order;
    let coeffs: Vec<f64> = (1..=s).map(|l| -params.beta[x][l]).collect();
    monic_roots(&coeffs)
}

fn vandermonde(eigs: &[Complex64]) -> Vec<Vec<Complex64>> {
    // Column j is the eigenvector (1, z_j, z_j^2, ...) of the companion matrix.
    let s = eigs.len();
    let mut p = vec![vec![Complex64::new(0.0, 0.0); s]; s];
    for (j, z) in eigs.iter().enumerate() {
        let mut pow = Complex64::new(1.0, 0.0);
        for row in p.iter_mut() {
            row[j] = pow;
            pow *= z;
        }
    }
    p
}

fn inf_norm(m: &[Vec<Complex64>]) -> f64 {
    m.iter()
        .map(|row| row.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Compute spectral radii and the eigenbasis norms, then evaluate both
/// contraction conditions.
///
/// The norm is `|A| = |P^{-1} A P|_inf` with `P` the eigenvector matrix of
/// the `basis_regime` companion matrix. The mixture check loads, from each
/// starting regime, the most adversarial stay weight in
/// `[pi_minus, 1 - pi_plus]` onto the larger squared norm.
pub fn stability_check(params: &GaussianArParams, basis_regime: usize) -> Result<StabilityReport> {
    params.validate()?;
    let m = params.num_regimes;
    let s = params.order;
    assert!(basis_regime < m, "basis regime out of range");

    let eigs: Vec<Vec<Complex64>> = (0..m).map(|x| companion_eigenvalues(params, x)).collect();
    let spectral_radii: Vec<f64> = eigs
        .iter()
        .map(|e| e.iter().map(|z| z.norm()).fold(0.0, f64::max))
        .collect();

    // A companion matrix is diagonalizable iff its eigenvalues are distinct.
    let basis = &eigs[basis_regime];
    let scale = basis.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut defective = false;
    for i in 0..s {
        for j in i + 1..s {
            if (basis[i] - basis[j]).norm() < 1e-8 * scale {
                defective = true;
            }
        }
    }
    let p = vandermonde(basis);
    let inv_ap = if defective {
        None
    } else {
        // One solve per regime: P X = A P, then the norm of X.
        let mut cols = Vec::with_capacity(m);
        for x in 0..m {
            let a = companion_matrix(params, x);
            let mut ap = vec![vec![Complex64::new(0.0, 0.0); s]; s];
            for i in 0..s {
                for j in 0..s {
                    for k in 0..s {
                        ap[i][j] += Complex64::new(a[i][k], 0.0) * p[k][j];
                    }
                }
            }
            match complex_solve(&p, &ap) {
                Some(x_mat) => cols.push(x_mat),
                None => {
                    cols.clear();
                    break;
                }
            }
        }
        if cols.len() == m {
            Some(cols)
        } else {
            None
        }
    };

    let transformed = inv_ap.ok_or_else(|| Error::DefectiveBasis {
        basis_regime,
        spectral_radii: spectral_radii.clone(),
    })?;
    let eigenbasis_norms: Vec<f64> = transformed.iter().map(|t| inf_norm(t)).collect();
    let uniform_contraction = eigenbasis_norms.iter().all(|&n| n < 1.0);

    // Worst-case mixture from each starting regime. The stay weight can take
    // any value in [pi_minus, 1 - pi_plus]; the rest splits uniformly over
    // the other regimes, so the adversary picks whichever endpoint loads the
    // larger squared norm.
    let sq: Vec<f64> = eigenbasis_norms.iter().map(|n| n * n).collect();
    let mut mixture_contraction = true;
    for x0 in 0..m {
        let others = (0..m).filter(|&x| x != x0);
        let mean_other: f64 = others.clone().map(|x| sq[x]).sum::<f64>() / (m as f64 - 1.0);
        let eval = |stay: f64| stay * sq[x0] + (1.0 - stay) * mean_other;
        let worst = eval(params.pi_minus[x0]).max(eval(1.0 - params.pi_plus[x0]));
        if worst >= 1.0 {
            mixture_contraction = false;
        }
    }

    Ok(StabilityReport {
        spectral_radii,
        basis_regime,
        eigenbasis_norms,
        uniform_contraction,
        mixture_contraction,
    })
}
