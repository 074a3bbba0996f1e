//! GARCH(p,q) model specification, volatility recursion, simulation,
//! volatility gradients and top-Lyapunov-exponent estimation.
//!
//! Conventions
//! -----------
//! - The parameter vector is θ = (ω, α₁..α_p, β₁..β_q); index 0 is ω.
//! - σ̃²_t = ω + Σᵢ αᵢ X²_{t−i} + Σⱼ βⱼ σ̃²_{t−j}, t = 1..n, with pre-sample
//!   values fixed by an [`InitRule`].
//! - Any σ̃²_t above [`DIVERGENCE_BOUND`] aborts the recursion with
//!   [`GarchError::Divergence`].

use crate::error::{GarchError, Result};
use crate::rng::{StreamRng, StreamSeed};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, StudentsT};

/// Volatilities above this bound are treated as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e300;

/// Model order and parameters of a GARCH(p,q) process.
///
/// Construction enforces ω > 0, αᵢ ≥ 0, βⱼ ≥ 0 and Σβ < 1. The tacit
/// requirement that the last lags are strictly positive is reported by
/// [`GarchSpec::is_identifiable`] rather than enforced, so degenerate
/// constant-variance and boundary fits remain representable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchSpec {
    omega: f64,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

impl GarchSpec {
    pub fn new(omega: f64, alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(GarchError::InvalidSpec(format!("omega must be > 0, got {omega}")));
        }
        if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(GarchError::InvalidSpec(format!("alpha entries must be >= 0, got {a}")));
        }
        if let Some(b) = beta.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return Err(GarchError::InvalidSpec(format!("beta entries must be >= 0, got {b}")));
        }
        let beta_sum: f64 = beta.iter().sum();
        if beta_sum >= 1.0 {
            return Err(GarchError::InvalidSpec(format!(
                "sum of beta must be < 1, got {beta_sum}"
            )));
        }
        Ok(Self { omega, alpha, beta })
    }

    /// GARCH(1,1) shorthand.
    pub fn garch11(omega: f64, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(omega, vec![alpha], vec![beta])
    }

    /// σ²_t = 0.1 + 0.1 X²_{t−1} + 0.1 σ²_{t−1}.
    pub fn dgp1() -> Self {
        Self::garch11(0.1, 0.1, 0.1).expect("valid constant spec")
    }

    /// σ²_t = 0.5 + 0.4 X²_{t−1} + 0.4 σ²_{t−1}.
    pub fn dgp2() -> Self {
        Self::garch11(0.5, 0.4, 0.4).expect("valid constant spec")
    }

    /// Rebuild a spec of order (p, q) from θ = (ω, α, β).
    pub fn from_params(p: usize, q: usize, theta: &[f64]) -> Result<Self> {
        if theta.len() != 1 + p + q {
            return Err(GarchError::LengthMismatch { expected: 1 + p + q, got: theta.len() });
        }
        Self::new(theta[0], theta[1..1 + p].to_vec(), theta[1 + p..].to_vec())
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn p(&self) -> usize {
        self.alpha.len()
    }

    pub fn q(&self) -> usize {
        self.beta.len()
    }

    /// Length of θ, `1 + p + q`.
    pub fn n_params(&self) -> usize {
        1 + self.p() + self.q()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.n_params());
        theta.push(self.omega);
        theta.extend_from_slice(&self.alpha);
        theta.extend_from_slice(&self.beta);
        theta
    }

    /// Σα + Σβ.
    pub fn persistence(&self) -> f64 {
        self.alpha.iter().sum::<f64>() + self.beta.iter().sum::<f64>()
    }

    /// ω / (1 − Σα − Σβ) when the process is second-order stationary.
    pub fn stationary_variance(&self) -> Option<f64> {
        let pers = self.persistence();
        (pers < 1.0).then(|| self.omega / (1.0 - pers))
    }

    /// α_p > 0 when p ≥ 1 and β_q > 0 when q ≥ 1.
    pub fn is_identifiable(&self) -> bool {
        self.alpha.last().is_none_or(|a| *a > 0.0) && self.beta.last().is_none_or(|b| *b > 0.0)
    }
}

/// How pre-sample X² and σ̃² values are initialised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InitRule {
    /// X²_{0..1−p} = σ̃²_{0..1−q} = ω.
    #[default]
    OmegaInit,
    /// X²_{0..1−p} = σ̃²_{0..1−q} = X²_1.
    FirstSquaredInit,
}

impl InitRule {
    fn presample(self, omega: f64, x2_first: f64) -> f64 {
        match self {
            InitRule::OmegaInit => omega,
            InitRule::FirstSquaredInit => x2_first,
        }
    }
}

pub(crate) fn validate_series(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(GarchError::EmptySeries);
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(GarchError::NonFinite(i));
    }
    Ok(())
}

/// Core recursion over squared observations; writes σ̃² into `out`.
pub(crate) fn recursion_into(
    spec: &GarchSpec,
    x2: &[f64],
    init: InitRule,
    out: &mut Vec<f64>,
) -> Result<()> {
    let pre = init.presample(spec.omega, x2[0]);
    out.clear();
    out.reserve(x2.len());
    for t in 0..x2.len() {
        let mut s = spec.omega;
        for (i, a) in spec.alpha.iter().enumerate() {
            let lag = i + 1;
            s += a * if t >= lag { x2[t - lag] } else { pre };
        }
        for (j, b) in spec.beta.iter().enumerate() {
            let lag = j + 1;
            s += b * if t >= lag { out[t - lag] } else { pre };
        }
        if !(s <= DIVERGENCE_BOUND) {
            return Err(GarchError::Divergence { t, value: s });
        }
        out.push(s);
    }
    Ok(())
}

/// Conditional variances σ̃²_t, t = 1..n, of the observed series `x`.
pub fn volatility_recursion(spec: &GarchSpec, x: &[f64], init: InitRule) -> Result<Vec<f64>> {
    validate_series(x)?;
    let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
    let mut out = Vec::new();
    recursion_into(spec, &x2, init, &mut out)?;
    Ok(out)
}

/// Gradients ∂σ̃²_t/∂θ, one vector of length `1 + p + q` per observation.
///
/// Pre-sample gradients follow the initialisation rule: under
/// [`InitRule::OmegaInit`] every pre-sample X² and σ̃² equals ω, so their
/// derivative is the unit vector in the ω direction; under
/// [`InitRule::FirstSquaredInit`] they are data and have zero gradient.
pub fn volatility_gradient(
    spec: &GarchSpec,
    x: &[f64],
    sigma2: &[f64],
    init: InitRule,
) -> Result<Vec<Vec<f64>>> {
    validate_series(x)?;
    if sigma2.len() != x.len() {
        return Err(GarchError::LengthMismatch { expected: x.len(), got: sigma2.len() });
    }
    let (p, q) = (spec.p(), spec.q());
    let d = spec.n_params();
    let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
    let pre = init.presample(spec.omega, x2[0]);
    let pre_grad: Vec<f64> = {
        let mut g = vec![0.0; d];
        if init == InitRule::OmegaInit {
            g[0] = 1.0;
        }
        g
    };

    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(x.len());
    for t in 0..x.len() {
        let mut g = vec![0.0; d];
        g[0] = 1.0;
        for i in 0..p {
            let lag = i + 1;
            if t >= lag {
                g[1 + i] += x2[t - lag];
            } else {
                g[1 + i] += pre;
                for (gk, pk) in g.iter_mut().zip(&pre_grad) {
                    *gk += spec.alpha[i] * pk;
                }
            }
        }
        for j in 0..q {
            let lag = j + 1;
            let b = spec.beta[j];
            if t >= lag {
                g[1 + p + j] += sigma2[t - lag];
                for (gk, prev) in g.iter_mut().zip(&grads[t - lag]) {
                    *gk += b * prev;
                }
            } else {
                g[1 + p + j] += pre;
                for (gk, pk) in g.iter_mut().zip(&pre_grad) {
                    *gk += b * pk;
                }
            }
        }
        grads.push(g);
    }
    Ok(grads)
}

/// Standardized innovation law: every variant has mean 0 and variance 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InnovationDist {
    StandardNormal,
    /// (1 − φ)·N(0,1) + φ·N(2,1), shifted by 2φ and scaled by √(1 + 4φ(1 − φ)).
    MixtureNormal { phi: f64 },
    /// Student-t with ν = 1/φ degrees of freedom, scaled by √(ν/(ν − 2)).
    StudentT { phi: f64 },
}

impl InnovationDist {
    pub fn mixture(phi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&phi) {
            return Err(GarchError::InvalidInput(format!("mixture weight {phi} not in [0,1]")));
        }
        Ok(InnovationDist::MixtureNormal { phi })
    }

    /// Student-t with 1/φ degrees of freedom; φ = 0 is the normal limit.
    pub fn student_t(phi: f64) -> Result<Self> {
        if phi == 0.0 {
            return Ok(InnovationDist::StandardNormal);
        }
        if !(phi > 0.0 && phi < 0.5) {
            return Err(GarchError::InvalidInput(format!(
                "Student-t needs 0 < phi < 1/2 (finite variance), got {phi}"
            )));
        }
        Ok(InnovationDist::StudentT { phi })
    }

    /// Mean of the raw (unstandardized) law.
    pub fn location(&self) -> f64 {
        match *self {
            InnovationDist::MixtureNormal { phi } => 2.0 * phi,
            _ => 0.0,
        }
    }

    /// Standard deviation of the raw law.
    pub fn scale(&self) -> f64 {
        match *self {
            InnovationDist::StandardNormal => 1.0,
            InnovationDist::MixtureNormal { phi } => (1.0 + 4.0 * phi * (1.0 - phi)).sqrt(),
            InnovationDist::StudentT { phi } => {
                let nu = 1.0 / phi;
                (nu / (nu - 2.0)).sqrt()
            }
        }
    }

    /// E ε⁴ of the standardized law (infinite for t with ν ≤ 4).
    pub fn kurtosis(&self) -> f64 {
        match *self {
            InnovationDist::StandardNormal => 3.0,
            InnovationDist::MixtureNormal { phi } => {
                let m = 2.0 * phi;
                let fourth = |c: f64| c.powi(4) + 6.0 * c * c + 3.0;
                let mu4 = (1.0 - phi) * fourth(-m) + phi * fourth(2.0 - m);
                let var = 1.0 + 4.0 * phi * (1.0 - phi);
                mu4 / (var * var)
            }
            InnovationDist::StudentT { phi } => {
                let nu = 1.0 / phi;
                if nu > 4.0 {
                    3.0 * (nu - 2.0) / (nu - 4.0)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InnovationDist::StandardNormal => StandardNormal.sample(rng),
            InnovationDist::MixtureNormal { phi } => {
                let z: f64 = StandardNormal.sample(rng);
                let shifted = if rng.random::<f64>() < phi { z + 2.0 } else { z };
                (shifted - self.location()) / self.scale()
            }
            InnovationDist::StudentT { phi } => {
                let t = rand_distr::StudentT::new(1.0 / phi)
                    .expect("validated degrees of freedom")
                    .sample(rng);
                t / self.scale()
            }
        }
    }

    /// CDF of the standardized law.
    pub fn cdf(&self, x: f64) -> f64 {
        use crate::special::normal_cdf;
        match *self {
            InnovationDist::StandardNormal => normal_cdf(x),
            InnovationDist::MixtureNormal { phi } => {
                let raw = x * self.scale() + self.location();
                (1.0 - phi) * normal_cdf(raw) + phi * normal_cdf(raw - 2.0)
            }
            InnovationDist::StudentT { phi } => {
                let t = StudentsT::new(0.0, 1.0, 1.0 / phi).expect("validated degrees of freedom");
                t.cdf(x * self.scale())
            }
        }
    }

    /// Density of the standardized law.
    pub fn pdf(&self, x: f64) -> f64 {
        use crate::special::normal_pdf;
        match *self {
            InnovationDist::StandardNormal => normal_pdf(x),
            InnovationDist::MixtureNormal { phi } => {
                let s = self.scale();
                let raw = x * s + self.location();
                s * ((1.0 - phi) * normal_pdf(raw) + phi * normal_pdf(raw - 2.0))
            }
            InnovationDist::StudentT { phi } => {
                let s = self.scale();
                let t = StudentsT::new(0.0, 1.0, 1.0 / phi).expect("validated degrees of freedom");
                s * t.pdf(x * s)
            }
        }
    }
}

/// A simulated GARCH path after warm-up removal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedSample {
    pub values: Vec<f64>,
    pub volatilities: Vec<f64>,
    pub innovations: Vec<f64>,
    pub seed: Option<u64>,
    pub warmup_discarded: usize,
}

/// Simulate `n0 + n` steps from pre-sample values ω and keep the last `n`.
pub fn simulate_with_rng<R: Rng + ?Sized>(
    spec: &GarchSpec,
    dist: &InnovationDist,
    n: usize,
    n0: usize,
    rng: &mut R,
) -> Result<SimulatedSample> {
    simulate_with_source(spec, n, n0, || dist.sample(rng))
}

/// As [`simulate_with_rng`], with innovations drawn from an arbitrary source.
pub fn simulate_with_source<F: FnMut() -> f64>(
    spec: &GarchSpec,
    n: usize,
    n0: usize,
    mut draw: F,
) -> Result<SimulatedSample> {
    if n == 0 {
        return Err(GarchError::InvalidInput("simulation length must be >= 1".into()));
    }
    if spec.persistence() >= 1.0 {
        log::warn!(
            "simulating with persistence {:.4} >= 1; the path may not be weakly stationary",
            spec.persistence()
        );
    }
    let total = n0 + n;
    let (p, q) = (spec.p(), spec.q());
    let mut x2 = Vec::with_capacity(total);
    let mut sig2 = Vec::with_capacity(total);
    let mut values = Vec::with_capacity(n);
    let mut innovations = Vec::with_capacity(n);
    for t in 0..total {
        let mut s = spec.omega;
        for i in 0..p {
            s += spec.alpha[i] * if t > i { x2[t - i - 1] } else { spec.omega };
        }
        for j in 0..q {
            s += spec.beta[j] * if t > j { sig2[t - j - 1] } else { spec.omega };
        }
        if !(s <= DIVERGENCE_BOUND) {
            return Err(GarchError::Divergence { t, value: s });
        }
        let eps = draw();
        let x = s.sqrt() * eps;
        x2.push(x * x);
        sig2.push(s);
        if t >= n0 {
            values.push(x);
            innovations.push(eps);
        }
    }
    let volatilities = sig2.split_off(n0);
    Ok(SimulatedSample { values, volatilities, innovations, seed: None, warmup_discarded: n0 })
}

/// Seeded simulation; identical arguments give bitwise-identical output.
pub fn simulate(
    spec: &GarchSpec,
    dist: &InnovationDist,
    n: usize,
    n0: usize,
    seed: u64,
) -> Result<SimulatedSample> {
    let mut rng = StreamSeed::new(seed).rng(0, 0);
    let mut sample = simulate_with_rng(spec, dist, n, n0, &mut rng)?;
    sample.seed = Some(seed);
    Ok(sample)
}

/// Monte Carlo estimate of the top Lyapunov exponent γ(Δ₀).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub gamma: f64,
    pub std_error: f64,
    /// True when the scalar E log(α ε² + β) path was used.
    pub scalar_path: bool,
}

impl LyapunovEstimate {
    pub fn is_stationary(&self) -> bool {
        self.gamma < 0.0
    }
}

const RENORMALIZE_EVERY: usize = 50;

/// Companion matrix Δ_t (row-major, dimension p + q, or q when p = 0).
///
/// State (X²_t..X²_{t−p+1}, σ²_t..σ²_{t−q+1}); the first row carries the
/// ε²_t-scaled coefficients, row p the plain coefficients, and identity
/// blocks shift the two lag chains. Empty blocks are omitted when p or q
/// equals 1.
pub fn companion_matrix(spec: &GarchSpec, eps2: f64) -> (usize, Vec<f64>) {
    let (p, q) = (spec.p(), spec.q());
    let coeffs: Vec<f64> = spec.alpha.iter().chain(&spec.beta).copied().collect();
    if p == 0 {
        let d = q;
        let mut m = vec![0.0; d * d];
        m[..d].copy_from_slice(&spec.beta);
        for j in 1..q {
            m[j * d + j - 1] = 1.0;
        }
        return (d, m);
    }
    let d = p + q;
    let mut m = vec![0.0; d * d];
    for (c, v) in coeffs.iter().enumerate() {
        m[c] = v * eps2;
    }
    for i in 1..p {
        m[i * d + i - 1] = 1.0;
    }
    if q >= 1 {
        m[p * d..p * d + d].copy_from_slice(&coeffs);
        for j in 1..q {
            m[(p + j) * d + p + j - 1] = 1.0;
        }
    }
    (d, m)
}

fn matmul_into(d: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    for i in 0..d {
        for j in 0..d {
            let mut s = 0.0;
            for k in 0..d {
                s += a[i * d + k] * b[k * d + j];
            }
            out[i * d + j] = s;
        }
    }
}

/// t⁻¹·log‖Δ₁⋯Δ_t‖ along one innovation path, renormalising every
/// 50 steps to avoid overflow.
pub fn lyapunov_matrix_path<R: Rng + ?Sized>(
    spec: &GarchSpec,
    dist: &InnovationDist,
    t_max: usize,
    rng: &mut R,
) -> f64 {
    let (d, _) = companion_matrix(spec, 1.0);
    if d == 0 {
        return f64::NEG_INFINITY;
    }
    let mut prod = vec![0.0; d * d];
    for i in 0..d {
        prod[i * d + i] = 1.0;
    }
    let mut scratch = vec![0.0; d * d];
    let mut log_acc = 0.0;
    let norm = |m: &[f64]| m.iter().map(|v| v * v).sum::<f64>().sqrt();
    for t in 1..=t_max {
        let eps = dist.sample(rng);
        let (_, delta) = companion_matrix(spec, eps * eps);
        matmul_into(d, &delta, &prod, &mut scratch);
        std::mem::swap(&mut prod, &mut scratch);
        if t % RENORMALIZE_EVERY == 0 || t == t_max {
            let s = norm(&prod);
            if s == 0.0 {
                return f64::NEG_INFINITY;
            }
            log_acc += s.ln();
            prod.iter_mut().for_each(|v| *v /= s);
        }
    }
    log_acc / t_max as f64
}

/// Average of log(α ε²_t + β) along one path (GARCH(1,1) and ARCH(1)).
pub fn lyapunov_scalar_path<R: Rng + ?Sized>(
    spec: &GarchSpec,
    dist: &InnovationDist,
    t_max: usize,
    rng: &mut R,
) -> f64 {
    let a = spec.alpha.first().copied().unwrap_or(0.0);
    let b = spec.beta.first().copied().unwrap_or(0.0);
    let mut acc = 0.0;
    for _ in 0..t_max {
        let eps = dist.sample(rng);
        acc += (a * eps * eps + b).ln();
    }
    acc / t_max as f64
}

/// Estimate γ(Δ₀) as the average of `reps` independent path estimates.
///
/// GARCH(1,1) and ARCH(1) use the exact scalar reduction; all other orders
/// use the renormalised matrix product.
pub fn lyapunov_exponent(
    spec: &GarchSpec,
    dist: &InnovationDist,
    t_max: usize,
    reps: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    if t_max < 100 {
        return Err(GarchError::InvalidInput("t_max must be >= 100".into()));
    }
    if reps == 0 {
        return Err(GarchError::InvalidInput("reps must be >= 1".into()));
    }
    let scalar = spec.p() == 1 && spec.q() <= 1;
    let streams = StreamSeed::new(seed);
    let estimates: Vec<f64> = (0..reps)
        .map(|r| {
            let mut rng: StreamRng = streams.rng(0, r as u32);
            if scalar {
                lyapunov_scalar_path(spec, dist, t_max, &mut rng)
            } else {
                lyapunov_matrix_path(spec, dist, t_max, &mut rng)
            }
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / reps as f64;
    let std_error = if reps > 1 && mean.is_finite() {
        let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        (var / reps as f64).sqrt()
    } else {
        0.0
    };
    Ok(LyapunovEstimate { gamma: mean, std_error, scalar_path: scalar })
}
