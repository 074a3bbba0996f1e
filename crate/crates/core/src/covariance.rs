//! Plug-in estimate Σ̂_N of the dispersion matrix of √N(T̂ − μ).
//!
//! Linearising T̂_j around the true distributions expresses √N(T̂_j − μ_j)
//! as Σ_m ∫ B_m J′(H) dμ_{j,m}, where B_m is the residual empirical process
//! of group m and the signed measures are
//!
//! ```text
//! μ_{j,j} = −λ_j^{-1/2} Σ_{i≠j} λ_i F_i,     μ_{j,m} = λ_m^{1/2} F_j  (m ≠ j).
//! ```
//!
//! B_m itself splits into the innovation empirical process ℰ_m and the
//! estimation drift 𝒜_m·x f_m(x), so each group contributes a Brownian-bridge
//! part, a drift-variance part (κ_m − 1)τ_mᵀU_m⁻¹τ_m and a bridge/drift
//! cross part. The plug-in replaces F_j by the residual EDFs, H by the
//! clipped pooled EDF, f_j by a Gaussian KDE and expectations by sample
//! averages at θ̂.
//!
//! Two routes are provided. [`assemble_sigma`] contracts per-group k×k
//! blocks built with O(n log n) prefix sums. [`assemble_sigma_reference`]
//! sums the named components (σ₁, σ₂, σ₃, γ = K₁ + K₂ on the diagonal,
//! σ₁ and σ₂ off it) with literal O(n²) double sums.

use crate::error::{GarchError, Result};
use crate::kde::DensityEstimate;
use crate::qml::ModelDiagnostics;
use crate::ranks::{clipped_pooled_cdf, Ecdf, ScoreFunction};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Ridge is added when the smallest eigenvalue is at most this fraction of
/// the trace.
pub const RIDGE_TRIGGER: f64 = 1e-10;
/// Ridge size as a fraction of the trace.
pub const RIDGE_SCALE: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub struct CovarianceInputs<'a> {
    pub residuals: &'a [Vec<f64>],
    pub diagnostics: &'a [ModelDiagnostics],
    pub score: ScoreFunction,
}

/// Per-entry breakdown of Σ̂_N before any ridge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaComponents {
    /// Bridge part of each diagonal entry.
    pub sigma1: Vec<f64>,
    /// Own-group drift variance.
    pub sigma2: Vec<f64>,
    /// Other-group drift variances.
    pub sigma3: Vec<f64>,
    /// Bridge/drift cross terms, K₁ + K₂.
    pub gamma: Vec<f64>,
    /// Bridge part of each off-diagonal entry (zero diagonal).
    pub sigma1_off: Vec<Vec<f64>>,
    /// Drift-variance plus bridge/drift cross parts off the diagonal.
    pub sigma2_off: Vec<Vec<f64>>,
}

impl SigmaComponents {
    fn zeros(k: usize) -> Self {
        Self {
            sigma1: vec![0.0; k],
            sigma2: vec![0.0; k],
            sigma3: vec![0.0; k],
            gamma: vec![0.0; k],
            sigma1_off: vec![vec![0.0; k]; k],
            sigma2_off: vec![vec![0.0; k]; k],
        }
    }

    /// Entry (j, j′) of the un-ridged matrix.
    pub fn entry(&self, j: usize, jp: usize) -> f64 {
        if j == jp {
            self.sigma1[j] + self.sigma2[j] + self.sigma3[j] + self.gamma[j]
        } else {
            self.sigma1_off[j][jp] + self.sigma2_off[j][jp]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaHat {
    /// Symmetric k×k estimate, ridge included.
    pub matrix: Vec<Vec<f64>>,
    pub ridge_applied: f64,
    /// Smallest eigenvalue before the ridge.
    pub min_eigenvalue: f64,
    pub components: SigmaComponents,
}

impl SigmaHat {
    fn from_components(components: SigmaComponents) -> Result<Self> {
        let k = components.sigma1.len();
        let mut m = DMatrix::from_fn(k, k, |a, b| {
            0.5 * (components.entry(a, b) + components.entry(b, a))
        });
        let trace = m.trace();
        if !(trace > 0.0) || !trace.is_finite() {
            return Err(GarchError::Covariance(format!(
                "dispersion estimate has non-positive trace {trace}"
            )));
        }
        let min_eigenvalue = m.clone().symmetric_eigenvalues().min();
        let mut ridge_applied = 0.0;
        if min_eigenvalue <= RIDGE_TRIGGER * trace {
            ridge_applied = RIDGE_SCALE * trace;
            for i in 0..k {
                m[(i, i)] += ridge_applied;
            }
        }
        let matrix = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        Ok(Self { matrix, ridge_applied, min_eigenvalue, components })
    }

    pub fn k(&self) -> usize {
        self.matrix.len()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let k = self.k();
        DMatrix::from_fn(k, k, |a, b| self.matrix[a][b])
    }

    /// Σ̂⁻¹ s by Cholesky; errors if Σ̂ is not positive definite.
    pub fn solve(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.k() {
            return Err(GarchError::LengthMismatch { expected: self.k(), got: s.len() });
        }
        let chol = self.to_matrix().cholesky().ok_or_else(|| {
            GarchError::Singular("dispersion estimate is not positive definite".into())
        })?;
        Ok(chol.solve(&DVector::from_column_slice(s)).iter().copied().collect())
    }

    /// sᵀ Σ̂⁻¹ s.
    pub fn quadratic_form(&self, s: &[f64]) -> Result<f64> {
        let x = self.solve(s)?;
        Ok(x.iter().zip(s).map(|(a, b)| a * b).sum())
    }
}

struct Group {
    values: Vec<f64>,
    /// Indices of `values` in ascending order.
    order: Vec<usize>,
    edf: Ecdf,
    kde: DensityEstimate,
    /// J′ at the clipped pooled EDF, per point.
    jp: Vec<f64>,
    /// Mean of ε².
    second_moment: f64,
    /// Prefix sums of (ε²/m₂ − 1)/n over `order`.
    centered_sq_prefix: Vec<f64>,
}

/// Precomputed plug-in ingredients shared by both routes.
pub struct CovarianceContext<'a> {
    groups: Vec<Group>,
    diag: &'a [ModelDiagnostics],
    lambda: Vec<f64>,
    total: usize,
    pooled: Ecdf,
    score: ScoreFunction,
    /// f_at[m][i][t] = f̂_m(ε_{i,t}).
    f_at: Vec<Vec<Vec<f64>>>,
    /// cdf_at[m][i][t] = F̂_m(ε_{i,t}).
    cdf_at: Vec<Vec<Vec<f64>>>,
}

impl<'a> CovarianceContext<'a> {
    pub fn new(inputs: &CovarianceInputs<'a>) -> Result<Self> {
        let k = inputs.residuals.len();
        if k < 2 {
            return Err(GarchError::InvalidInput("dispersion estimate needs k ≥ 2".into()));
        }
        if inputs.diagnostics.len() != k {
            return Err(GarchError::LengthMismatch { expected: k, got: inputs.diagnostics.len() });
        }
        for (j, r) in inputs.residuals.iter().enumerate() {
            if r.len() < 2 {
                return Err(GarchError::InvalidInput(format!("group {j} has fewer than 2 residuals")));
            }
        }
        let all: Vec<f64> = inputs.residuals.iter().flatten().copied().collect();
        let pooled = Ecdf::new(&all)?;
        let total = all.len();
        let lambda: Vec<f64> =
            inputs.residuals.iter().map(|r| r.len() as f64 / total as f64).collect();

        let mut groups = Vec::with_capacity(k);
        for r in inputs.residuals {
            let edf = Ecdf::new(r)?;
            let kde = DensityEstimate::new(r)?;
            let mut order: Vec<usize> = (0..r.len()).collect();
            order.sort_by(|&a, &b| r[a].total_cmp(&r[b]).then(a.cmp(&b)));
            let jp = r
                .iter()
                .map(|&x| inputs.score.j_prime(clipped_pooled_cdf(pooled.eval(x), total)))
                .collect::<Result<Vec<f64>>>()?;
            let n = r.len() as f64;
            let second_moment = r.iter().map(|e| e * e).sum::<f64>() / n;
            if !(second_moment > 0.0) {
                return Err(GarchError::InvalidInput("residuals are identically zero".into()));
            }
            let mut centered_sq_prefix = Vec::with_capacity(r.len() + 1);
            centered_sq_prefix.push(0.0);
            let mut acc = 0.0;
            for &i in &order {
                acc += (r[i] * r[i] / second_moment - 1.0) / n;
                centered_sq_prefix.push(acc);
            }
            groups.push(Group { values: r.clone(), order, edf, kde, jp, second_moment, centered_sq_prefix });
        }
        let f_at = (0..k)
            .map(|m| {
                groups
                    .iter()
                    .map(|g| g.values.iter().map(|&x| groups[m].kde.density(x)).collect())
                    .collect()
            })
            .collect();
        let cdf_at = (0..k)
            .map(|m| {
                groups
                    .iter()
                    .map(|g| g.values.iter().map(|&x| groups[m].edf.eval(x)).collect())
                    .collect()
            })
            .collect();
        Ok(Self {
            groups,
            diag: inputs.diagnostics,
            lambda,
            total,
            pooled,
            score: inputs.score,
            f_at,
            cdf_at,
        })
    }

    pub fn k(&self) -> usize {
        self.groups.len()
    }

    fn n(&self, i: usize) -> f64 {
        self.groups[i].values.len() as f64
    }

    fn jp_at(&self, x: f64) -> f64 {
        self.score
            .j_prime(clipped_pooled_cdf(self.pooled.eval(x), self.total))
            .expect("clipped argument lies in (0,1)")
    }

    /// Γ̂_j(x, y) = F̂_j(x)(1 − F̂_j(y)) J′(Ĥc(x)) J′(Ĥc(y)) for x ≤ y; the
    /// arguments are ordered before evaluation.
    pub fn gamma_kernel(&self, j: usize, x: f64, y: f64) -> f64 {
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let f = &self.groups[j].edf;
        f.eval(lo) * (1.0 - f.eval(hi)) * self.jp_at(lo) * self.jp_at(hi)
    }

    /// ∫∫ Γ̂_m(x∧y, x∨y) dF̂_a(x) dF̂_b(y) by literal double sum.
    pub fn bridge_integral_brute(&self, m: usize, a: usize, b: usize) -> f64 {
        let (ga, gb) = (&self.groups[a], &self.groups[b]);
        let (fa, fb) = (&self.cdf_at[m][a], &self.cdf_at[m][b]);
        let mut acc = 0.0;
        for s in 0..ga.values.len() {
            let x = ga.values[s];
            for t in 0..gb.values.len() {
                let y = gb.values[t];
                let (f_lo, f_hi) = if x <= y { (fa[s], fb[t]) } else { (fb[t], fa[s]) };
                acc += f_lo * (1.0 - f_hi) * ga.jp[s] * gb.jp[t];
            }
        }
        acc / (self.n(a) * self.n(b))
    }

    /// Same integral as [`Self::bridge_integral_brute`] via one merged sweep.
    pub fn bridge_integral(&self, m: usize, a: usize, b: usize) -> f64 {
        let (ga, gb) = (&self.groups[a], &self.groups[b]);
        let (fa, fb) = (&self.cdf_at[m][a], &self.cdf_at[m][b]);
        let (na, nb) = (ga.order.len(), gb.order.len());
        let (mut ia, mut ib) = (0, 0);
        let (mut lower_a, mut lower_b) = (0.0, 0.0);
        let (mut part1, mut part2) = (0.0, 0.0);
        // Points of `a` precede points of `b` at equal values, so part1 covers
        // x ≤ y and part2 covers y < x.
        while ia < na || ib < nb {
            let take_a = ib == nb
                || (ia < na && ga.values[ga.order[ia]] <= gb.values[gb.order[ib]]);
            if take_a {
                let s = ga.order[ia];
                lower_a += fa[s] * ga.jp[s];
                part2 += (1.0 - fa[s]) * ga.jp[s] * lower_b;
                ia += 1;
            } else {
                let t = gb.order[ib];
                part1 += (1.0 - fb[t]) * gb.jp[t] * lower_a;
                lower_b += fb[t] * gb.jp[t];
                ib += 1;
            }
        }
        (part1 + part2) / (na as f64 * nb as f64)
    }

    /// I(a, b) = ∫ x f̂_a(x) J′(Ĥc(x)) dF̂_b(x).
    pub fn drift_loading(&self, a: usize, b: usize) -> f64 {
        let g = &self.groups[b];
        let f = &self.f_at[a][b];
        g.values.iter().zip(f).zip(&g.jp).map(|((x, fx), jp)| x * fx * jp).sum::<f64>() / self.n(b)
    }

    /// ω̂_j = −λ_j^{-1/2} Σ_{i≠j} λ_i I(j, i) · τ̂_j.
    pub fn omega_vec(&self, j: usize) -> Vec<f64> {
        let c = -self.lambda[j].powf(-0.5)
            * (0..self.k()).filter(|&i| i != j).map(|i| self.lambda[i] * self.drift_loading(j, i)).sum::<f64>();
        self.diag[j].tau_hat.iter().map(|t| c * t).collect()
    }

    /// ν̂_i = λ_i^{1/2} I(i, j) · τ̂_i, group i's drift loading on T̂_j.
    pub fn nu_vec(&self, i: usize, j: usize) -> Vec<f64> {
        let c = self.lambda[i].sqrt() * self.drift_loading(i, j);
        self.diag[i].tau_hat.iter().map(|t| c * t).collect()
    }

    fn drift_form(&self, m: usize, a: &[f64], b: &[f64]) -> Result<f64> {
        let d = &self.diag[m];
        let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
        let amb: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        Ok((d.kappa_hat - 1.0) * 0.25 * (d.u_inverse_quad(&ab)? - d.u_inverse_quad(&amb)?))
    }

    /// σ̂₂,jj = (κ̂_j − 1) ω̂ᵀ Û_j⁻¹ ω̂.
    pub fn sigma2_diag(&self, j: usize) -> Result<f64> {
        let w = self.omega_vec(j);
        Ok((self.diag[j].kappa_hat - 1.0) * self.diag[j].u_inverse_quad(&w)?)
    }

    /// σ̂₃,jj = Σ_{i≠j} (κ̂_i − 1) ν̂_iᵀ Û_i⁻¹ ν̂_i.
    pub fn sigma3_diag(&self, j: usize) -> Result<f64> {
        let mut acc = 0.0;
        for i in (0..self.k()).filter(|&i| i != j) {
            let v = self.nu_vec(i, j);
            acc += (self.diag[i].kappa_hat - 1.0) * self.diag[i].u_inverse_quad(&v)?;
        }
        Ok(acc)
    }

    /// ĥ_i^l(v) = δ̂_i^l (1/n_i) Σ_t (ε̃²_{i,t} − 1) I(ε̂_{i,t} ≤ v), with ε̃
    /// the residuals rescaled to unit second moment as in κ̂. The rescaling
    /// makes (ĥ, κ̂) the empirical moments of one joint law, which keeps
    /// every per-group block positive semidefinite.
    pub fn h_func(&self, i: usize, l: usize, v: f64) -> f64 {
        let g = &self.groups[i];
        let m2 = g.second_moment;
        let s: f64 = g.values.iter().filter(|&&e| e <= v).map(|e| e * e / m2 - 1.0).sum();
        self.diag[i].delta_hat[l] * s / self.n(i)
    }

    /// Σ_l τ̂_{m,l} ĥ_m^l(v) through the sorted prefix sums.
    fn drift_bridge_cov(&self, m: usize, v: f64) -> f64 {
        let g = &self.groups[m];
        let pos = g.order.partition_point(|&i| g.values[i] <= v);
        self.diag[m].tau_dot_delta() * g.centered_sq_prefix[pos]
    }

    /// ∫∫ Σ_l τ̂_{m,l} ĥ_m^l(x) ψ̂_m(x, y) dF̂_a(x) dF̂_b(y) with
    /// ψ̂_m(x, y) = y f̂_m(y) J′(Ĥc(x)) J′(Ĥc(y)), by literal double sum.
    fn cross_integral_brute(&self, m: usize, a: usize, b: usize) -> f64 {
        let (ga, gb) = (&self.groups[a], &self.groups[b]);
        let tau = &self.diag[m].tau_hat;
        let h: Vec<f64> = ga
            .values
            .iter()
            .map(|&x| (0..tau.len()).map(|l| tau[l] * self.h_func(m, l, x)).sum())
            .collect();
        let fb = &self.f_at[m][b];
        let mut acc = 0.0;
        for s in 0..ga.values.len() {
            for t in 0..gb.values.len() {
                acc += h[s] * ga.jp[s] * gb.values[t] * fb[t] * gb.jp[t];
            }
        }
        acc / (self.n(a) * self.n(b))
    }

    /// σ̂₁,jj: the three brace groups (other-group kernels on F̂_j ⊗ F̂_j,
    /// own kernel on F̂_i ⊗ F̂_i, own kernel on F̂_i ⊗ F̂_i′).
    pub fn sigma1_diag(&self, j: usize) -> f64 {
        let k = self.k();
        let l = &self.lambda;
        let mut first = 0.0;
        let mut second = 0.0;
        let mut third = 0.0;
        for i in (0..k).filter(|&i| i != j) {
            first += l[i] * self.bridge_integral_brute(i, j, j);
            second += l[i] * l[i] * self.bridge_integral_brute(j, i, i);
            for ip in (0..k).filter(|&ip| ip != j && ip != i) {
                third += l[i] * l[ip] * self.bridge_integral_brute(j, i, ip);
            }
        }
        first + (second + third) / l[j]
    }

    /// (K̂₁, K̂₂) for diagonal entry j.
    pub fn gamma_diag(&self, j: usize) -> (f64, f64) {
        let k = self.k();
        let l = &self.lambda;
        let mut k1 = 0.0;
        for i in (0..k).filter(|&i| i != j) {
            k1 += 2.0 * l[i] * self.cross_integral_brute(i, j, j);
        }
        let mut k2 = 0.0;
        for i in (0..k).filter(|&i| i != j) {
            for ip in (0..k).filter(|&ip| ip != j) {
                k2 += 2.0 * l[i] * l[ip] * self.cross_integral_brute(j, i, ip) / l[j];
            }
        }
        (k1, k2)
    }

    /// Loading of T̂_j on group m's process as (group, weight) terms.
    fn loading(&self, j: usize, m: usize) -> Vec<(usize, f64)> {
        if j == m {
            let c = -self.lambda[j].powf(-0.5);
            (0..self.k()).filter(|&i| i != j).map(|i| (i, c * self.lambda[i])).collect()
        } else {
            vec![(j, self.lambda[m].sqrt())]
        }
    }

    /// (σ̂₁,jj′, σ̂₂,jj′) for j ≠ j′ by literal double sums.
    pub fn sigma_offdiag(&self, j: usize, jp: usize) -> Result<(f64, f64)> {
        let k = self.k();
        let l = &self.lambda;
        // Bridge part: third-group kernels, then each entry's own kernel.
        let mut s1 = 0.0;
        for m in (0..k).filter(|&m| m != j && m != jp) {
            s1 += l[m] * self.bridge_integral_brute(m, j, jp);
        }
        for i in (0..k).filter(|&i| i != j) {
            s1 -= l[i] * self.bridge_integral_brute(j, i, jp);
        }
        for i in (0..k).filter(|&i| i != jp) {
            s1 -= l[i] * self.bridge_integral_brute(jp, j, i);
        }
        // Drift parts, group by group.
        let mut s2 = 0.0;
        for m in 0..k {
            let (la, lb) = (self.loading(j, m), self.loading(jp, m));
            let ca: f64 = la.iter().map(|&(i, w)| w * self.drift_loading(m, i)).sum();
            let cb: f64 = lb.iter().map(|&(i, w)| w * self.drift_loading(m, i)).sum();
            let tau = &self.diag[m].tau_hat;
            let va: Vec<f64> = tau.iter().map(|t| ca * t).collect();
            let vb: Vec<f64> = tau.iter().map(|t| cb * t).collect();
            s2 += self.drift_form(m, &va, &vb)?;
            for &(a, wa) in &la {
                for &(b, wb) in &lb {
                    s2 += wa * wb * (self.cross_integral_brute(m, a, b) + self.cross_integral_brute(m, b, a));
                }
            }
        }
        Ok((s1, s2))
    }

    /// Components through the named O(n²) formulas.
    pub fn components_reference(&self) -> Result<SigmaComponents> {
        let k = self.k();
        let mut c = SigmaComponents::zeros(k);
        for j in 0..k {
            c.sigma1[j] = self.sigma1_diag(j);
            c.sigma2[j] = self.sigma2_diag(j)?;
            c.sigma3[j] = self.sigma3_diag(j)?;
            let (k1, k2) = self.gamma_diag(j);
            c.gamma[j] = k1 + k2;
            for jp in (0..k).filter(|&jp| jp != j) {
                let (a, b) = self.sigma_offdiag(j, jp)?;
                c.sigma1_off[j][jp] = a;
                c.sigma2_off[j][jp] = b;
            }
        }
        Ok(c)
    }

    /// Components through per-group blocks
    /// M_m(a,b) = Q_m(a,b) + Var𝒜_m I_a I_b + I_b G_a + I_a G_b,
    /// contracted with the loading coefficients.
    pub fn components_fast(&self) -> Result<SigmaComponents> {
        let k = self.k();
        let mut c = SigmaComponents::zeros(k);
        for m in 0..k {
            let d = &self.diag[m];
            let var_a = d.drift_variance();
            let load: Vec<f64> = (0..k).map(|i| self.drift_loading(m, i)).collect();
            let cross: Vec<f64> = (0..k)
                .map(|i| {
                    let g = &self.groups[i];
                    g.values
                        .iter()
                        .zip(&g.jp)
                        .map(|(&x, jp)| self.drift_bridge_cov(m, x) * jp)
                        .sum::<f64>()
                        / self.n(i)
                })
                .collect();
            let mut q = vec![vec![0.0; k]; k];
            for a in 0..k {
                for b in a..k {
                    let v = self.bridge_integral(m, a, b);
                    q[a][b] = v;
                    q[b][a] = v;
                }
            }
            let coef: Vec<Vec<f64>> = (0..k)
                .map(|j| {
                    let mut v = vec![0.0; k];
                    for (i, w) in self.loading(j, m) {
                        v[i] = w;
                    }
                    v
                })
                .collect();
            for j in 0..k {
                for jp in 0..k {
                    let (cj, cjp) = (&coef[j], &coef[jp]);
                    let mut bridge = 0.0;
                    for a in 0..k {
                        for b in 0..k {
                            bridge += cj[a] * cjp[b] * q[a][b];
                        }
                    }
                    let dj: f64 = (0..k).map(|a| cj[a] * load[a]).sum();
                    let djp: f64 = (0..k).map(|a| cjp[a] * load[a]).sum();
                    let gj: f64 = (0..k).map(|a| cj[a] * cross[a]).sum();
                    let gjp: f64 = (0..k).map(|a| cjp[a] * cross[a]).sum();
                    let drift = var_a * dj * djp;
                    let mixed = djp * gj + dj * gjp;
                    if j == jp {
                        c.sigma1[j] += bridge;
                        if m == j {
                            c.sigma2[j] += drift;
                        } else {
                            c.sigma3[j] += drift;
                        }
                        c.gamma[j] += mixed;
                    } else {
                        c.sigma1_off[j][jp] += bridge;
                        c.sigma2_off[j][jp] += drift + mixed;
                    }
                }
            }
        }
        Ok(c)
    }
}

/// Σ̂_N with the ridge policy applied.
pub fn assemble_sigma(inputs: &CovarianceInputs<'_>) -> Result<SigmaHat> {
    SigmaHat::from_components(CovarianceContext::new(inputs)?.components_fast()?)
}

/// Σ̂_N through the literal double-sum formulas; O(n²) per entry family.
pub fn assemble_sigma_reference(inputs: &CovarianceInputs<'_>) -> Result<SigmaHat> {
    SigmaHat::from_components(CovarianceContext::new(inputs)?.components_reference()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag(tau: f64, kappa: f64) -> ModelDiagnostics {
        ModelDiagnostics {
            u_hat: vec![vec![4.0]],
            u_singular: false,
            u_ridge: 0.0,
            tau_hat: vec![tau],
            kappa_hat: kappa,
            delta_hat: vec![tau / 2.0],
            tau_quad: tau * tau / 4.0,
        }
    }

    fn sample(seed: u64, n: usize, shift: f64) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 3.4 + shift
            })
            .collect()
    }

    #[test]
    fn wilcoxon_kernel_collapses() {
        let r = vec![sample(1, 20, 0.0), sample(2, 25, 0.1)];
        let d = vec![diag(1.0, 3.0), diag(1.0, 3.0)];
        let ctx = CovarianceContext::new(&CovarianceInputs {
            residuals: &r,
            diagnostics: &d,
            score: ScoreFunction::Wilcoxon,
        })
        .unwrap();
        let f = Ecdf::new(&r[0]).unwrap();
        for (x, y) in [(-0.5, 0.3), (0.2, 1.0), (-9.0, 0.0)] {
            assert_relative_eq!(ctx.gamma_kernel(0, x, y), f.eval(x) * (1.0 - f.eval(y)), epsilon = 1e-15);
        }
        assert_eq!(ctx.gamma_kernel(0, -10.0, 0.0), 0.0);
    }

    #[test]
    fn sweep_matches_brute_force() {
        let r = vec![sample(3, 17, 0.0), sample(4, 23, 0.3), sample(5, 11, -0.2)];
        let d = vec![diag(0.5, 3.0), diag(0.5, 3.0), diag(0.5, 3.0)];
        for score in ScoreFunction::ALL {
            let ctx = CovarianceContext::new(&CovarianceInputs { residuals: &r, diagnostics: &d, score })
                .unwrap();
            for m in 0..3 {
                for a in 0..3 {
                    for b in 0..3 {
                        assert_relative_eq!(
                            ctx.bridge_integral(m, a, b),
                            ctx.bridge_integral_brute(m, a, b),
                            max_relative = 1e-12,
                            epsilon = 1e-15
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn too_few_groups_rejected() {
        let r = vec![sample(1, 10, 0.0)];
        let d = vec![diag(0.5, 3.0)];
        assert!(CovarianceContext::new(&CovarianceInputs {
            residuals: &r,
            diagnostics: &d,
            score: ScoreFunction::Wilcoxon
        })
        .is_err());
    }
}
