//! Small dense linear-algebra kernels: monic polynomial roots
//! (Durand-Kerner), complex Gaussian elimination, and a symmetric
//! positive-definite solve. Problem sizes here are tiny (the AR order or the
//! covariate dimension), so simple dense routines are the right tool.

use num_complex::Complex64;

/// Roots of the monic polynomial z^n + c[0] z^{n-1} + ... + c[n-1]
/// by Durand-Kerner iteration.
pub fn monic_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![Complex64::new(-coeffs[0], 0.0)];
    }
    let eval = |z: Complex64| -> Complex64 {
        let mut v = Complex64::new(1.0, 0.0);
        for &c in coeffs {
            v = v * z + c;
        }
        v
    };
    // Start on a circle of radius based on the Cauchy bound, with an
    // irrational angle offset so the initial guesses are not symmetric.
    let radius = 1.0 + coeffs.iter().cloned().fold(0.0f64, |a, c| a.max(c.abs()));
    let mut roots: Vec<Complex64> = (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64) + 0.4;
            Complex64::from_polar(radius, angle)
        })
        .collect();
    for _ in 0..200 {
        let mut max_step = 0.0f64;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            if denom.norm() == 0.0 {
                // Coincident iterates: nudge apart and continue.
                roots[i] += Complex64::new(1e-8, 1e-8);
                continue;
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 * radius.max(1.0) {
            break;
        }
    }
    roots
}

/// Solve A X = B in place for complex square A (partial pivoting).
/// Returns None if A is numerically singular.
pub fn complex_solve(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Option<Vec<Vec<Complex64>>> {
    let n = a.len();
    let ncols = if n == 0 { 0 } else { b[0].len() };
    let mut m: Vec<Vec<Complex64>> = a.iter().map(|row| row.clone()).collect();
    let mut x: Vec<Vec<Complex64>> = b.iter().map(|row| row.clone()).collect();
    let scale = m
        .iter()
        .flat_map(|r| r.iter())
        .map(|v| v.norm())
        .fold(0.0f64, f64::max)
        .max(1.0);

    for col in 0..n {
        let (pivot_row, pivot_norm) = (col..n)
            .map(|r| (r, m[r][col].norm()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if pivot_norm < 1e-13 * scale {
            return None;
        }
        m.swap(col, pivot_row);
        x.swap(col, pivot_row);
        let pivot = m[col][col];
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[r][col] / pivot;
            for c in col..n {
                let v = m[col][c];
                m[r][c] -= f * v;
            }
            for c in 0..ncols {
                let v = x[col][c];
                x[r][c] -= f * v;
            }
        }
    }
    for r in 0..n {
        let pivot = m[r][r];
        for c in 0..ncols {
            x[r][c] /= pivot;
        }
    }
    Some(x)
}

/// Cholesky factor L (lower triangular, row-major) of a symmetric
/// positive-definite matrix, or None if the matrix is not PD.
pub fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solve L L' x = b given the Cholesky factor L.
pub fn cholesky_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[i][k] * y[k];
        }
        y[i] = sum / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    x
}

/// Solve the symmetric system A x = b by Cholesky, reporting rank deficiency
/// relative to the largest diagonal entry.
///
/// `rel_tol` guards the pivots: a pivot below `rel_tol * max_diag` counts as
/// singular.
pub fn spd_solve(a: &[Vec<f64>], b: &[f64], rel_tol: f64) -> Option<Vec<f64>> {
    let n = a.len();
    let max_diag = (0..n).map(|i| a[i][i].abs()).fold(0.0f64, f64::max);
    if max_diag == 0.0 {
        return None;
    }
    let tol = rel_tol * max_diag;
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= tol {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Some(cholesky_solve(&l, b))
}
