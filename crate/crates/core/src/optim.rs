//! Dense BFGS with backtracking Armijo line search.
//!
//! The objective fills the gradient buffer and returns the value; returning
//! `+∞` (or NaN) marks a point as infeasible and makes the line search
//! shrink the step.

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Convergence when ‖∇f‖_∞ falls below this.
    pub grad_tol: f64,
    /// Largest Euclidean step the line search starts from.
    pub max_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iter: 200, grad_tol: 1e-6, max_step: 2.0 }
    }
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimise `objective` from `x0`. Returns the best point seen.
pub fn bfgs<F>(mut objective: F, x0: &[f64], opts: &BfgsOptions) -> BfgsOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; d];
    let mut f = objective(&x, &mut g);
    if !f.is_finite() {
        return BfgsOutcome { x, f: f64::INFINITY, grad: g, iterations: 0, converged: false };
    }

    let identity = |h: &mut Vec<f64>, scale: f64| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..d {
            h[i * d + i] = scale;
        }
    };
    let mut h = vec![0.0; d * d];
    identity(&mut h, 1.0);
    let mut first_update = true;

    let mut x_new = vec![0.0; d];
    let mut g_new = vec![0.0; d];
    let mut dir = vec![0.0; d];
    let mut iterations = 0;
    let mut stalled = 0;

    while iterations < opts.max_iter {
        if inf_norm(&g) < opts.grad_tol {
            return BfgsOutcome { x, f, grad: g, iterations, converged: true };
        }
        iterations += 1;

        for i in 0..d {
            dir[i] = -(0..d).map(|j| h[i * d + j] * g[j]).sum::<f64>();
        }
        let mut slope = dot(&dir, &g);
        if !(slope < 0.0) {
            identity(&mut h, 1.0);
            first_update = true;
            dir.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            slope = dot(&dir, &g);
        }
        let dir_norm = dot(&dir, &dir).sqrt();
        let mut step = if dir_norm > opts.max_step { opts.max_step / dir_norm } else { 1.0 };

        let mut accepted = false;
        let mut f_new = f;
        for _ in 0..60 {
            for i in 0..d {
                x_new[i] = x[i] + step * dir[i];
            }
            f_new = objective(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= f + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if first_update {
                break;
            }
            identity(&mut h, 1.0);
            first_update = true;
            continue;
        }

        let s: Vec<f64> = (0..d).map(|i| x_new[i] - x[i]).collect();
        let y: Vec<f64> = (0..d).map(|i| g_new[i] - g[i]).collect();
        let sy = dot(&s, &y);
        let improvement = f - f_new;
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        f = f_new;

        if improvement <= 1e-15 * f.abs().max(1.0) {
            stalled += 1;
            if stalled >= 3 {
                break;
            }
        } else {
            stalled = 0;
        }

        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if first_update {
                identity(&mut h, sy / dot(&y, &y));
                first_update = false;
            }
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..d).map(|i| (0..d).map(|j| h[i * d + j] * y[j]).sum()).collect();
            let yhy = dot(&y, &hy);
            for i in 0..d {
                for j in 0..d {
                    h[i * d + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j]
                        - hy[i] * s[j]
                        - s[i] * hy[j]);
                }
            }
        }
    }
    let converged = inf_norm(&g) < opts.grad_tol;
    BfgsOutcome { x, f, grad: g, iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let out = bfgs(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2)
            },
            &[-1.2, 1.0],
            &BfgsOptions { max_iter: 500, grad_tol: 1e-8, max_step: 10.0 },
        );
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_region_is_avoided() {
        // Minimum of (x − 2)² restricted to x < 1.5 lies on the barrier side.
        let out = bfgs(
            |x, g| {
                if x[0] >= 1.5 {
                    return f64::INFINITY;
                }
                g[0] = 2.0 * (x[0] - 2.0);
                (x[0] - 2.0).powi(2)
            },
            &[0.0],
            &BfgsOptions::default(),
        );
        assert!(out.x[0] < 1.5 && out.x[0] > 1.4);
        assert!(out.f.is_finite());
    }
}
