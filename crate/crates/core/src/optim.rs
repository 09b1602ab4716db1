//! A small box-constrained BFGS maximizer used by the transition M-steps.
//!
//! The objective dimensions here are tiny (a handful of free coordinates per
//! regime row), so a dense inverse-Hessian update with backtracking line
//! search is plenty. Supports simple box clamping; the inverse Hessian is
//! reset whenever a clamp activates.

/// Bounds and stopping rules for [`maximize`].
#[derive(Debug, Clone)]
pub struct OptimOptions {
    /// Componentwise lower/upper clamp applied to every iterate.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub max_iters: usize,
    /// Stop when the gradient infinity-norm falls below this.
    pub grad_tol: f64,
    /// Stop when an accepted step improves the objective by less than this.
    pub f_tol: f64,
}

impl OptimOptions {
    pub fn unbounded(dim: usize) -> Self {
        OptimOptions {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
            max_iters: 200,
            grad_tol: 1e-9,
            f_tol: 1e-12,
        }
    }
}

fn clamp(x: &mut [f64], opts: &OptimOptions) -> bool {
    let mut touched = false;
    for (i, v) in x.iter_mut().enumerate() {
        let c = v.clamp(opts.lower[i], opts.upper[i]);
        if c != *v {
            touched = true;
            *v = c;
        }
    }
    touched
}

/// Maximize `f` starting from `x0`. The closure receives the point and an
/// optional gradient slot: line-search probes pass `None` so pure value
/// evaluations stay cheap. Returns the best point found and its value.
pub fn maximize<F>(mut f: F, x0: &[f64], opts: &OptimOptions) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64], Option<&mut [f64]>) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    clamp(&mut x, opts);
    let mut grad = vec![0.0; n];
    let mut fx = f(&x, Some(&mut grad));
    if !fx.is_finite() {
        return (x, fx);
    }

    // Inverse Hessian approximation, row-major identity.
    let mut h = vec![0.0; n * n];
    let reset = |h: &mut Vec<f64>| {
        h.fill(0.0);
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
    };
    reset(&mut h);

    let mut dir = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut grad_new = vec![0.0; n];
    for _ in 0..opts.max_iters {
        let gnorm = grad.iter().cloned().fold(0.0f64, |a, g| a.max(g.abs()));
        if gnorm < opts.grad_tol {
            break;
        }
        // Ascent direction H * grad.
        for i in 0..n {
            dir[i] = (0..n).map(|j| h[i * n + j] * grad[j]).sum();
        }
        let mut slope: f64 = dir.iter().zip(&grad).map(|(d, g)| d * g).sum();
        if slope <= 0.0 {
            reset(&mut h);
            dir.copy_from_slice(&grad);
            slope = grad.iter().map(|g| g * g).sum();
        }

        // Backtracking Armijo line search on values only.
        let mut step = 1.0;
        let mut accepted = false;
        let mut clamped = false;
        let mut f_new;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            let touched = clamp(&mut x_new, opts);
            f_new = f(&x_new, None);
            // Armijo with the nominal step; after a clamp any strict
            // improvement is enough since the true step is shorter.
            let sufficient = if touched {
                f_new > fx
            } else {
                f_new >= fx + 1e-4 * step * slope && f_new > fx
            };
            if f_new.is_finite() && sufficient {
                accepted = true;
                clamped = touched;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        f_new = f(&x_new, Some(&mut grad_new));

        let improvement = f_new - fx;
        if clamped {
            reset(&mut h);
        } else {
            // BFGS update of the inverse Hessian (maximization convention):
            // s = x_new - x, yv = grad_new - grad, rho = 1 / (s . -yv)
            let mut s = vec![0.0; n];
            let mut yv = vec![0.0; n];
            for i in 0..n {
                s[i] = x_new[i] - x[i];
                yv[i] = grad[i] - grad_new[i]; // negated difference for ascent
            }
            let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
            if sy > 1e-12 {
                let rho = 1.0 / sy;
                // H = (I - rho s y') H (I - rho y s') + rho s s'
                let mut hy = vec![0.0; n];
                for i in 0..n {
                    hy[i] = (0..n).map(|j| h[i * n + j] * yv[j]).sum();
                }
                let yhy: f64 = yv.iter().zip(&hy).map(|(a, b)| a * b).sum();
                for i in 0..n {
                    for j in 0..n {
                        h[i * n + j] += rho * rho * yhy * s[i] * s[j]
                            - rho * (hy[i] * s[j] + s[i] * hy[j])
                            + rho * s[i] * s[j];
                    }
                }
            } else {
                reset(&mut h);
            }
        }

        x.copy_from_slice(&x_new);
        grad.copy_from_slice(&grad_new);
        fx = f_new;
        if improvement.abs() < opts.f_tol {
            break;
        }
    }
    (x, fx)
}
