//! Gaussian quasi-maximum-likelihood estimation of GARCH(p,q) models and
//! the per-model plug-in quantities used by the dispersion-matrix estimator.
//!
//! Fitting minimises Ĩ_n(θ) = n⁻¹ Σ [log σ̃²_t + X²_t/σ̃²_t] by BFGS in
//! log-coordinates (ω = eᵃ, αᵢ = e^{bᵢ}, βⱼ = e^{cⱼ}) with an analytic
//! gradient. Points with Σβ ≥ 1 or a diverging recursion are infeasible.
//! Several deterministic starting points are tried; the lowest objective
//! wins.

use crate::error::{GarchError, Result};
use crate::garch::{validate_series, volatility_gradient, volatility_recursion, GarchSpec, InitRule};
use crate::optim::{bfgs, BfgsOptions};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Estimates below this are treated as sitting on the α/β ≥ 0 boundary.
pub const BOUNDARY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub init_rule: InitRule,
    /// Number of deterministic starting points (at least 1).
    pub starts: usize,
    /// Gradient tolerance (sup-norm, log-coordinates).
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { init_rule: InitRule::OmegaInit, starts: 3, tolerance: 1e-6, max_iter: 200 }
    }
}

/// A fitted GARCH model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec_hat: GarchSpec,
    pub objective: f64,
    /// Fitted σ̃²_t; omitted from serialized output.
    #[serde(skip_serializing, default)]
    pub sigma2: Vec<f64>,
    /// ε̂_t = X_t/σ̃_t; omitted from serialized output.
    #[serde(skip_serializing, default)]
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub init_rule: InitRule,
    /// Some α or β estimate was clamped to 0.
    pub at_boundary: bool,
    pub gradient_norm: f64,
}

/// Objective state reused across evaluations of one series.
struct QuasiLik<'a> {
    x2: &'a [f64],
    p: usize,
    q: usize,
    init: InitRule,
    sig2: Vec<f64>,
    dsig: Vec<f64>,
}

impl<'a> QuasiLik<'a> {
    fn new(x2: &'a [f64], p: usize, q: usize, init: InitRule) -> Self {
        let d = 1 + p + q;
        Self { x2, p, q, init, sig2: vec![0.0; x2.len()], dsig: vec![0.0; x2.len() * d] }
    }

    /// Ĩ_n(θ) and, when requested, ∂Ĩ_n/∂θ. Returns +∞ on infeasible θ.
    fn eval(&mut self, theta: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let (p, q) = (self.p, self.q);
        let d = 1 + p + q;
        let omega = theta[0];
        let alpha = &theta[1..1 + p];
        let beta = &theta[1 + p..];
        if !(omega > 0.0) || beta.iter().sum::<f64>() >= 1.0 {
            return f64::INFINITY;
        }
        let n = self.x2.len();
        let pre = match self.init {
            InitRule::OmegaInit => omega,
            InitRule::FirstSquaredInit => self.x2[0],
        };
        let pre_domega = if self.init == InitRule::OmegaInit { 1.0 } else { 0.0 };
        let want_grad = grad.is_some();
        let mut total = 0.0;
        let mut gsum = [0.0f64; 16];
        let mut gsum_vec;
        let gacc: &mut [f64] = if d <= 16 {
            &mut gsum[..d]
        } else {
            gsum_vec = vec![0.0; d];
            &mut gsum_vec
        };

        for t in 0..n {
            let mut s = omega;
            for i in 0..p {
                s += alpha[i] * if t > i { self.x2[t - i - 1] } else { pre };
            }
            for j in 0..q {
                s += beta[j] * if t > j { self.sig2[t - j - 1] } else { pre };
            }
            if !(s > 0.0 && s <= crate::garch::DIVERGENCE_BOUND) {
                return f64::INFINITY;
            }
            self.sig2[t] = s;
            let ratio = self.x2[t] / s;
            total += s.ln() + ratio;

            if want_grad {
                let (head, tail) = self.dsig.split_at_mut(t * d);
                let g = &mut tail[..d];
                g.iter_mut().for_each(|v| *v = 0.0);
                g[0] = 1.0;
                for i in 0..p {
                    if t > i {
                        g[1 + i] += self.x2[t - i - 1];
                    } else {
                        g[1 + i] += pre;
                        g[0] += alpha[i] * pre_domega;
                    }
                }
                for j in 0..q {
                    if t > j {
                        g[1 + p + j] += self.sig2[t - j - 1];
                        let prev = &head[(t - j - 1) * d..(t - j) * d];
                        for k in 0..d {
                            g[k] += beta[j] * prev[k];
                        }
                    } else {
                        g[1 + p + j] += pre;
                        g[0] += beta[j] * pre_domega;
                    }
                }
                let w = (1.0 - ratio) / s;
                for k in 0..d {
                    gacc[k] += w * g[k];
                }
            }
        }
        if let Some(out) = grad {
            for k in 0..d {
                out[k] = gacc[k] / n as f64;
            }
        }
        total / n as f64
    }
}

/// Ĩ_n(θ) = n⁻¹ Σ_t [log σ̃²_t + X²_t/σ̃²_t].
pub fn negative_quasi_loglik(spec: &GarchSpec, x: &[f64], init: InitRule) -> Result<f64> {
    let sigma2 = volatility_recursion(spec, x, init)?;
    let n = x.len() as f64;
    Ok(sigma2.iter().zip(x).map(|(s, v)| s.ln() + v * v / s).sum::<f64>() / n)
}

/// Ĩ_n(θ) together with its analytic gradient ∂Ĩ_n/∂θ.
pub fn negative_quasi_loglik_gradient(
    spec: &GarchSpec,
    x: &[f64],
    init: InitRule,
) -> Result<(f64, Vec<f64>)> {
    validate_series(x)?;
    let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
    let mut lik = QuasiLik::new(&x2, spec.p(), spec.q(), init);
    let mut grad = vec![0.0; spec.n_params()];
    let f = lik.eval(&spec.params(), Some(&mut grad));
    if !f.is_finite() {
        // Recompute through the public recursion to surface the precise error.
        volatility_recursion(spec, x, init)?;
        return Err(GarchError::InvalidSpec("infeasible parameter vector".into()));
    }
    Ok((f, grad))
}

/// Deterministic starting points: (Σα, Σβ) profiles with moment-matched ω.
fn starting_points(x2: &[f64], p: usize, q: usize, count: usize) -> Vec<Vec<f64>> {
    const PROFILES: [(f64, f64); 5] = [(0.1, 0.5), (0.05, 0.85), (0.25, 0.1), (0.15, 0.7), (0.4, 0.3)];
    let m2 = x2.iter().sum::<f64>() / x2.len() as f64;
    let m2 = if m2 > 0.0 { m2 } else { 1.0 };
    (0..count.max(1))
        .map(|k| {
            let (a_tot, b_tot) = PROFILES[k % PROFILES.len()];
            let a_tot = if p == 0 { 0.0 } else { a_tot };
            let b_tot = if q == 0 { 0.0 } else { b_tot };
            let mut theta = Vec::with_capacity(1 + p + q);
            theta.push(m2 * (1.0 - a_tot - b_tot));
            theta.extend(std::iter::repeat_n(a_tot / p.max(1) as f64, p));
            theta.extend(std::iter::repeat_n(b_tot / q.max(1) as f64, q));
            theta
        })
        .collect()
}

/// Fit a GARCH(p,q) model by Gaussian QML.
///
/// A fit whose gradient tolerance is not met is still returned with
/// `converged = false`. Fails only when every start is infeasible.
pub fn fit(x: &[f64], p: usize, q: usize, opts: &FitOptions) -> Result<FitResult> {
    validate_series(x)?;
    let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
    fit_from_starts(x, p, q, opts, starting_points(&x2, p, q, opts.starts))
}

/// Fit from a single caller-supplied starting point, falling back to the
/// default starts when that run fails or does not converge.
pub fn fit_warm(
    x: &[f64],
    p: usize,
    q: usize,
    opts: &FitOptions,
    start: &GarchSpec,
) -> Result<FitResult> {
    validate_series(x)?;
    if start.p() != p || start.q() != q {
        return Err(GarchError::InvalidSpec(format!(
            "warm start has orders ({}, {}), expected ({p}, {q})",
            start.p(),
            start.q()
        )));
    }
    // Interior point so the log-coordinates are finite.
    let theta: Vec<f64> = start.params().iter().map(|v| v.max(1e-4)).collect();
    match fit_from_starts(x, p, q, opts, vec![theta]) {
        Ok(f) if f.converged => Ok(f),
        _ => fit(x, p, q, opts),
    }
}

fn fit_from_starts(
    x: &[f64],
    p: usize,
    q: usize,
    opts: &FitOptions,
    starts: Vec<Vec<f64>>,
) -> Result<FitResult> {
    let d = 1 + p + q;
    let floor = 20 * d;
    if x.len() < floor {
        return Err(GarchError::InvalidInput(format!(
            "need at least {floor} observations for a GARCH({p},{q}) fit, got {}",
            x.len()
        )));
    }
    let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
    let mut lik = QuasiLik::new(&x2, p, q, opts.init_rule);
    let bopts = BfgsOptions { max_iter: opts.max_iter, grad_tol: opts.tolerance, max_step: 2.0 };

    let mut best: Option<(Vec<f64>, f64, bool, usize, f64)> = None;
    let mut theta_buf = vec![0.0; d];
    for start in starts {
        let log0: Vec<f64> = start.iter().map(|v| v.ln()).collect();
        let out = bfgs(
            |phi, g| {
                for (t, f) in theta_buf.iter_mut().zip(phi) {
                    *t = f.exp();
                }
                let val = lik.eval(&theta_buf, Some(g));
                if val.is_finite() {
                    for (gk, tk) in g.iter_mut().zip(&theta_buf) {
                        *gk *= tk;
                    }
                }
                val
            },
            &log0,
            &bopts,
        );
        if !out.f.is_finite() {
            continue;
        }
        let gnorm = out.grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let better = best.as_ref().is_none_or(|b| out.f < b.1);
        if better {
            best = Some((out.x, out.f, out.converged, out.iterations, gnorm));
        }
    }

    let (phi, best_f, converged, iterations, gradient_norm) = best.ok_or_else(|| {
        GarchError::FitFailure {
            reason: "every starting point was infeasible".into(),
            best_objective: f64::INFINITY,
            best_params: Vec::new(),
        }
    })?;

    let mut theta: Vec<f64> = phi.iter().map(|v| v.exp()).collect();
    let mut at_boundary = false;
    for v in theta[1..].iter_mut() {
        if *v < BOUNDARY_TOL {
            *v = 0.0;
            at_boundary = true;
        }
    }
    let spec_hat = GarchSpec::from_params(p, q, &theta).map_err(|e| GarchError::FitFailure {
        reason: format!("estimate violates model constraints: {e}"),
        best_objective: best_f,
        best_params: theta.clone(),
    })?;
    let sigma2 = volatility_recursion(&spec_hat, x, opts.init_rule)?;
    let residuals: Vec<f64> = x.iter().zip(&sigma2).map(|(v, s)| v / s.sqrt()).collect();
    let objective =
        sigma2.iter().zip(&x2).map(|(s, v2)| s.ln() + v2 / s).sum::<f64>() / x.len() as f64;
    Ok(FitResult {
        spec_hat,
        objective,
        sigma2,
        residuals,
        converged,
        iterations,
        init_rule: opts.init_rule,
        at_boundary,
        gradient_norm,
    })
}

/// u_t = σ̃⁻²_t ∂σ̃²_t/∂θ at the fitted parameters.
pub fn scaled_gradients(fit: &FitResult, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    let grads = volatility_gradient(&fit.spec_hat, x, &fit.sigma2, fit.init_rule)?;
    Ok(grads
        .into_iter()
        .zip(&fit.sigma2)
        .map(|(g, s)| g.into_iter().map(|v| v / s).collect())
        .collect())
}

fn mean_vector(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows.first().map_or(0, |r| r.len());
    let mut m = vec![0.0; d];
    for r in rows {
        for (mk, rk) in m.iter_mut().zip(r) {
            *mk += rk;
        }
    }
    let n = rows.len() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

/// Û = n⁻¹ Σ u_t u_tᵀ (symmetrised) and whether it is numerically singular
/// (smallest eigenvalue below 1e-12·trace).
pub fn estimate_u(fit: &FitResult, x: &[f64]) -> Result<(DMatrix<f64>, bool)> {
    let u = scaled_gradients(fit, x)?;
    Ok(gram_with_flag(&u))
}

fn gram_with_flag(u: &[Vec<f64>]) -> (DMatrix<f64>, bool) {
    let d = u[0].len();
    let mut m = DMatrix::<f64>::zeros(d, d);
    for row in u {
        for i in 0..d {
            for j in 0..=i {
                m[(i, j)] += row[i] * row[j];
            }
        }
    }
    let n = u.len() as f64;
    for i in 0..d {
        for j in 0..=i {
            let v = m[(i, j)] / n;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let trace = m.trace();
    let min_eig = m.clone().symmetric_eigenvalues().min();
    let singular = !(trace > 0.0) || min_eig < 1e-12 * trace;
    (m, singular)
}

/// τ̂ = n⁻¹ Σ u_t / 2, the drift loading of the residual empirical process.
pub fn estimate_tau(fit: &FitResult, x: &[f64]) -> Result<Vec<f64>> {
    let u = scaled_gradients(fit, x)?;
    Ok(mean_vector(&u).into_iter().map(|v| 0.5 * v).collect())
}

/// κ̂ = mean ε̂⁴ after rescaling the residuals to unit second moment.
pub fn estimate_kappa(residuals: &[f64]) -> Result<f64> {
    if residuals.len() < 10 {
        return Err(GarchError::InvalidInput("kappa needs at least 10 residuals".into()));
    }
    let n = residuals.len() as f64;
    let m2 = residuals.iter().map(|e| e * e).sum::<f64>() / n;
    if !(m2 > 0.0) {
        return Err(GarchError::InvalidInput("residuals are identically zero".into()));
    }
    Ok(residuals.iter().map(|e| (e * e / m2).powi(2)).sum::<f64>() / n)
}

fn solve_spd(m: &DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| GarchError::Singular("Û is not positive definite".into()))?;
    Ok(chol.solve(&DVector::from_column_slice(rhs)).iter().copied().collect())
}

/// δ̂ = n⁻¹ Σ Û⁻¹ u_t = Û⁻¹ ū. Errors on a singular Û.
pub fn estimate_delta(fit: &FitResult, x: &[f64]) -> Result<Vec<f64>> {
    let u = scaled_gradients(fit, x)?;
    let (m, singular) = gram_with_flag(&u);
    if singular {
        return Err(GarchError::Singular("Û is singular; use ModelDiagnostics for a ridge".into()));
    }
    solve_spd(&m, &mean_vector(&u))
}

/// Â = Σ_l √n (θ̂_l − θ₀_l) τ̂_l; needs the true θ₀, so simulation only.
pub fn compute_a(fit: &FitResult, x: &[f64], theta0: &GarchSpec) -> Result<f64> {
    let theta_hat = fit.spec_hat.params();
    let theta0 = theta0.params();
    if theta0.len() != theta_hat.len() {
        return Err(GarchError::LengthMismatch { expected: theta_hat.len(), got: theta0.len() });
    }
    let tau = estimate_tau(fit, x)?;
    let root_n = (x.len() as f64).sqrt();
    Ok(theta_hat.iter().zip(&theta0).zip(&tau).map(|((h, t), w)| root_n * (h - t) * w).sum())
}

/// Plug-in estimates Û, τ̂, κ̂, δ̂ for one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub u_hat: Vec<Vec<f64>>,
    pub u_singular: bool,
    /// Ridge added to Û before inversion (0 unless singular).
    pub u_ridge: f64,
    pub tau_hat: Vec<f64>,
    pub kappa_hat: f64,
    pub delta_hat: Vec<f64>,
    /// τ̂ᵀ (Û + ridge)⁻¹ τ̂.
    pub tau_quad: f64,
}

impl ModelDiagnostics {
    pub fn compute(fit: &FitResult, x: &[f64]) -> Result<Self> {
        let u = scaled_gradients(fit, x)?;
        let (mut m, singular) = gram_with_flag(&u);
        let u_hat: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        let mut ridge = 0.0;
        if singular {
            ridge = 1e-8 * m.trace().max(f64::MIN_POSITIVE);
            for i in 0..m.nrows() {
                m[(i, i)] += ridge;
            }
        }
        let ubar = mean_vector(&u);
        let tau_hat: Vec<f64> = ubar.iter().map(|v| 0.5 * v).collect();
        let delta_hat = solve_spd(&m, &ubar)?;
        let tau_quad = 0.5 * tau_hat.iter().zip(&delta_hat).map(|(a, b)| a * b).sum::<f64>();
        let kappa_hat = estimate_kappa(&fit.residuals)?;
        Ok(Self { u_hat, u_singular: singular, u_ridge: ridge, tau_hat, kappa_hat, delta_hat, tau_quad })
    }

    pub fn n_params(&self) -> usize {
        self.tau_hat.len()
    }

    /// Σ_l τ̂_l δ̂_l, the loading of Σ_l τ_l h^l.
    pub fn tau_dot_delta(&self) -> f64 {
        self.tau_hat.iter().zip(&self.delta_hat).map(|(a, b)| a * b).sum()
    }

    /// Plug-in Var(Â) = (κ̂ − 1) τ̂ᵀ Û⁻¹ τ̂.
    pub fn drift_variance(&self) -> f64 {
        (self.kappa_hat - 1.0) * self.tau_quad
    }

    /// vᵀ (Û + ridge)⁻¹ v.
    pub fn u_inverse_quad(&self, v: &[f64]) -> Result<f64> {
        let d = self.n_params();
        let mut m = DMatrix::from_fn(d, d, |i, j| self.u_hat[i][j]);
        for i in 0..d {
            m[(i, i)] += self.u_ridge;
        }
        let sol = solve_spd(&m, v)?;
        Ok(sol.iter().zip(v).map(|(a, b)| a * b).sum())
    }
}
