//! Quasi-Newton minimization for small smooth problems.
//!
//! A dense BFGS with backtracking Armijo line search. The objectives in this
//! crate are smooth and periodic in every variable (angle charts), so the
//! search runs unconstrained and callers wrap angles only for reporting.

/// Stopping controls for [`bfgs_minimize`].
#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub f_tol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iters: 300,
            grad_tol: 1e-10,
            f_tol: 1e-15,
        }
    }
}

/// Result of a local minimization.
#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f_grad` (which writes the gradient into its second argument
/// and returns the value) starting from `x0`.
pub fn bfgs_minimize<F>(mut f_grad: F, x0: &[f64], opts: BfgsOptions) -> BfgsOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut f = f_grad(&x, &mut g);
    // inverse Hessian approximation, dense row-major
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    let mut iterations = 0;
    let mut converged = false;
    let mut dir = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];

    while iterations < opts.max_iters {
        iterations += 1;
        let gnorm = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if gnorm < opts.grad_tol {
            converged = true;
            break;
        }
        // dir = -H g
        for i in 0..n {
            dir[i] = -(0..n).map(|j| h[i * n + j] * g[j]).sum::<f64>();
        }
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            // reset to steepest descent if H lost positive definiteness
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] = if i == j { 1.0 } else { 0.0 };
                }
                dir[i] = -g[i];
            }
            slope = -dot(&g, &g);
            if slope == 0.0 {
                converged = true;
                break;
            }
        }
        // Armijo backtracking
        let mut step = 1.0;
        let mut found = false;
        let mut f_new = f;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + step * dir[i];
            }
            f_new = f_grad(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= f + 1e-4 * step * slope {
                found = true;
                break;
            }
            step *= 0.5;
        }
        if !found {
            break;
        }
        // BFGS update with s = x_new − x, y = g_new − g
        let mut sy = 0.0;
        for i in 0..n {
            sy += (x_new[i] - x[i]) * (g_new[i] - g[i]);
        }
        if sy > 1e-14 {
            let rho = 1.0 / sy;
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let s: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
            let y: Vec<f64> = (0..n).map(|i| g_new[i] - g[i]).collect();
            let hy: Vec<f64> = (0..n)
                .map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum())
                .collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += rho * rho * yhy * s[i] * s[j]
                        - rho * (hy[i] * s[j] + s[i] * hy[j])
                        + rho * s[i] * s[j];
                }
            }
        }
        let f_prev = f;
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        f = f_new;
        if (f_prev - f).abs() < opts.f_tol * (1.0 + f.abs()) {
            converged = true;
            break;
        }
    }
    BfgsOutcome {
        x,
        f,
        iterations,
        converged,
    }
}

/// Central finite-difference gradient, for verifying analytic gradients.
pub fn finite_difference_gradient<F>(mut f: F, x: &[f64], step: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + step;
        let fp = f(&xp);
        xp[i] = x[i] - step;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * step);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_quadratic_bowl() {
        let out = bfgs_minimize(
            |x, g| {
                g[0] = 2.0 * (x[0] - 3.0);
                g[1] = 8.0 * (x[1] + 1.0);
                (x[0] - 3.0).powi(2) + 4.0 * (x[1] + 1.0).powi(2)
            },
            &[0.0, 0.0],
            BfgsOptions::default(),
        );
        assert!(out.converged);
        assert!((out.x[0] - 3.0).abs() < 1e-7);
        assert!((out.x[1] + 1.0).abs() < 1e-7);
        assert!(out.f < 1e-12);
    }

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (1.0, 100.0);
            g[0] = -2.0 * (a - x[0]) - 4.0 * b * (x[1] - x[0] * x[0]) * x[0];
            g[1] = 2.0 * b * (x[1] - x[0] * x[0]);
            (a - x[0]).powi(2) + b * (x[1] - x[0] * x[0]).powi(2)
        };
        let out = bfgs_minimize(rosen, &[-1.2, 1.0], BfgsOptions::default());
        assert!((out.x[0] - 1.0).abs() < 1e-5, "x = {:?}", out.x);
        assert!((out.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn minimizes_periodic_objective() {
        // global minima at x ≡ π (mod 2π), value −1
        let out = bfgs_minimize(
            |x, g| {
                g[0] = -x[0].sin();
                x[0].cos()
            },
            &[2.0],
            BfgsOptions::default(),
        );
        assert!((out.f + 1.0).abs() < 1e-10);
    }

    #[test]
    fn finite_differences_match_analytic_gradient() {
        let f = |x: &[f64]| x[0].sin() * x[1].exp() + x[0] * x[1];
        let x = [0.7, -0.3];
        let fd = finite_difference_gradient(f, &x, 1e-5);
        let g0 = x[0].cos() * x[1].exp() + x[1];
        let g1 = x[0].sin() * x[1].exp() + x[0];
        assert!((fd[0] - g0).abs() < 1e-9);
        assert!((fd[1] - g1).abs() < 1e-9);
    }
}
