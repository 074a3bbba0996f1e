//! The k-sample tests: the asymptotic χ² test on L̂_N = N sᵀ Σ̂⁻¹ s, the
//! smoothed parametric bootstrap test, and the residual-empirical-process
//! decomposition diagnostic.
//!
//! Because Σ_j λ_j T̂_j equals (1/N) Σ_i J(i/(N+1)) for every data set, the
//! centred vector s = T̂ − μ_N satisfies λᵀs = 0 and Σ̂ has λ as a null
//! vector. The quadratic form therefore lives on a (k−1)-dimensional
//! subspace; [`ReferenceDof::Contrast`] (the default) refers L̂_N to χ²(k−1),
//! [`ReferenceDof::Nominal`] to χ²(k).

use crate::covariance::{assemble_sigma, CovarianceInputs, SigmaHat};
use crate::error::{GarchError, Result};
use crate::garch::{simulate_with_source, GarchSpec, InnovationDist, SimulatedSample};
use crate::kde::quantile_sorted;
use crate::qml::{fit, fit_warm, FitOptions, FitResult, ModelDiagnostics};
use crate::ranks::{linear_statistics, Ecdf, PooledSample, ScoreFunction};
use crate::rng::StreamSeed;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use crate::special::chi2_survival;

/// Degrees of freedom of the χ² reference law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceDof {
    /// k − 1, the rank of Σ̂ on the contrast space.
    #[default]
    Contrast,
    /// k.
    Nominal,
}

impl ReferenceDof {
    pub fn dof(self, k: usize) -> usize {
        match self {
            Self::Contrast => k - 1,
            Self::Nominal => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    pub score: ScoreFunction,
    pub level: f64,
    pub fit: FitOptions,
    pub reference: ReferenceDof,
    /// Smallest admissible λ_j = n_j/N.
    pub lambda_floor: f64,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            score: ScoreFunction::Wilcoxon,
            level: 0.05,
            fit: FitOptions::default(),
            reference: ReferenceDof::Contrast,
            lambda_floor: 0.0,
        }
    }
}

impl TestOptions {
    fn validate(&self) -> Result<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(GarchError::InvalidInput(format!("level {} outside (0,1)", self.level)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    #[serde(rename = "T")]
    pub t: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma_hat: SigmaHat,
    #[serde(rename = "L_N")]
    pub l_n: f64,
    pub dof: usize,
    pub p_asymptotic: f64,
    pub fits: Vec<FitResult>,
    pub diagnostics: Vec<ModelDiagnostics>,
    pub score: ScoreFunction,
    pub level: f64,
    pub reject: bool,
}

/// Fit every group, mapping failures to the offending group.
pub fn fit_groups(
    samples: &[Vec<f64>],
    orders: &[(usize, usize)],
    opts: &FitOptions,
) -> Result<Vec<FitResult>> {
    if samples.len() != orders.len() {
        return Err(GarchError::LengthMismatch { expected: samples.len(), got: orders.len() });
    }
    samples
        .iter()
        .zip(orders)
        .enumerate()
        .map(|(group, (x, &(p, q)))| {
            fit(x, p, q, opts).map_err(|e| GarchError::GroupFit { group, source: Box::new(e) })
        })
        .collect()
}

/// T̂, μ_N, Σ̂ and L̂_N from residuals and per-group plug-in diagnostics.
pub fn statistic_from_residuals(
    residuals: &[Vec<f64>],
    diagnostics: &[ModelDiagnostics],
    opts: &TestOptions,
) -> Result<(Vec<f64>, Vec<f64>, SigmaHat, f64)> {
    let pooled = PooledSample::with_lambda_floor(residuals, opts.lambda_floor)?;
    let t = linear_statistics(&pooled, opts.score)?;
    let mu = vec![opts.score.finite_null_mean(pooled.total()); t.len()];
    let sigma = assemble_sigma(&CovarianceInputs { residuals, diagnostics, score: opts.score })?;
    let l_n = quadratic_statistic(&t, &mu, &sigma, pooled.total())?;
    Ok((t, mu, sigma, l_n))
}

fn quadratic_statistic(t: &[f64], mu: &[f64], sigma: &SigmaHat, total: usize) -> Result<f64> {
    let s: Vec<f64> = t.iter().zip(mu).map(|(a, b)| a - b).collect();
    Ok((total as f64 * sigma.quadratic_form(&s)?).max(0.0))
}

fn residual_diagnostics(
    samples: &[Vec<f64>],
    fits: &[FitResult],
    skip: &[usize],
) -> Result<(Vec<Vec<f64>>, Vec<ModelDiagnostics>)> {
    let mut residuals = Vec::with_capacity(fits.len());
    let mut diagnostics = Vec::with_capacity(fits.len());
    for (group, ((x, f), &s)) in samples.iter().zip(fits).zip(skip).enumerate() {
        let d = ModelDiagnostics::compute(f, x)
            .map_err(|e| GarchError::GroupFit { group, source: Box::new(e) })?;
        residuals.push(f.residuals[s..].to_vec());
        diagnostics.push(d);
    }
    Ok((residuals, diagnostics))
}

/// Asymptotic test: fits each group, ranks the residuals and refers L̂_N to
/// the χ² law selected by `opts.reference`.
pub fn asymptotic_test(
    samples: &[Vec<f64>],
    orders: &[(usize, usize)],
    opts: &TestOptions,
) -> Result<TestResult> {
    opts.validate()?;
    if samples.len() < 2 {
        return Err(GarchError::InvalidInput("need at least two samples".into()));
    }
    let fits = fit_groups(samples, orders, &opts.fit)?;
    let (residuals, diagnostics) = residual_diagnostics(samples, &fits, &vec![0; fits.len()])?;
    let (t, mu, sigma_hat, l_n) = statistic_from_residuals(&residuals, &diagnostics, opts)?;
    let dof = opts.reference.dof(samples.len());
    let p_asymptotic = chi2_survival(l_n, dof).clamp(0.0, 1.0);
    Ok(TestResult {
        t,
        mu,
        sigma_hat,
        l_n,
        dof,
        p_asymptotic,
        fits,
        diagnostics,
        score: opts.score,
        level: opts.level,
        reject: p_asymptotic < opts.level,
    })
}

/// Source of bootstrap innovations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapInnovations {
    /// i.i.d. N(0,1).
    #[default]
    Gaussian,
    /// Draws with replacement from the group's standardised residuals.
    ResidualResample,
}

/// How Σ̂* is obtained in each replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// Recomputed from the replicate's residuals and fits.
    #[default]
    Recompute,
    /// Observed Σ̂ reused; faster, ignores Σ̂'s own sampling variability.
    FixedObserved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub warmup: usize,
    pub seed: u64,
    pub innovations: BootstrapInnovations,
    pub sigma_mode: SigmaMode,
    /// Worker threads; `None` uses the ambient rayon pool.
    pub workers: Option<usize>,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            replicates: 199,
            warmup: 500,
            seed: 0,
            innovations: BootstrapInnovations::Gaussian,
            sigma_mode: SigmaMode::Recompute,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub observed: TestResult,
    /// L̂*_b of retained replicates, in replicate order.
    pub replicates: Vec<f64>,
    pub p_bootstrap: f64,
    pub critical_value: f64,
    pub reject: bool,
    #[serde(rename = "B")]
    pub b: usize,
    pub dropped: usize,
    pub n0: usize,
    pub seed: u64,
    pub warning: Option<String>,
}

/// Bootstrap p-value (1 + #{L* ≥ L_obs}) / (B + 1).
pub fn bootstrap_p_value(replicates: &[f64], observed: f64) -> f64 {
    let exceed = replicates.iter().filter(|&&v| v >= observed).count();
    (1 + exceed) as f64 / (replicates.len() + 1) as f64
}

/// Type-7 (1 − level) sample quantile of the replicates.
pub fn bootstrap_critical_value(replicates: &[f64], level: f64) -> f64 {
    let mut sorted = replicates.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, 1.0 - level)
}

struct ReplicateContext<'a> {
    fits: &'a [FitResult],
    standardized: Vec<Vec<f64>>,
    observed_sigma: &'a SigmaHat,
    opts: &'a TestOptions,
    boot: &'a BootstrapOptions,
}

impl ReplicateContext<'_> {
    fn replicate(&self, streams: &StreamSeed, b: u32) -> Result<f64> {
        let k = self.fits.len();
        let mut samples = Vec::with_capacity(k);
        for (j, f) in self.fits.iter().enumerate() {
            let mut rng = streams.rng(j as u32, b);
            let n = f.sigma2.len();
            let path = match self.boot.innovations {
                BootstrapInnovations::Gaussian => simulate_with_source(&f.spec_hat, n, self.boot.warmup, || {
                    StandardNormal.sample(&mut rng)
                })?,
                BootstrapInnovations::ResidualResample => {
                    let pool = &self.standardized[j];
                    simulate_with_source(&f.spec_hat, n, self.boot.warmup, || {
                        pool[rng.random_range(0..pool.len())]
                    })?
                }
            };
            samples.push(path.values);
        }
        let orders: Vec<(usize, usize)> = self.fits.iter().map(|f| (f.spec_hat.p(), f.spec_hat.q())).collect();
        let fits = samples
            .iter()
            .zip(self.fits)
            .enumerate()
            .map(|(group, (x, f))| {
                fit_warm(x, f.spec_hat.p(), f.spec_hat.q(), &self.opts.fit, &f.spec_hat)
                    .map_err(|e| GarchError::GroupFit { group, source: Box::new(e) })
            })
            .collect::<Result<Vec<_>>>()?;
        let skip: Vec<usize> = orders.iter().map(|&(p, q)| p.max(q)).collect();
        let (residuals, diagnostics) = residual_diagnostics(&samples, &fits, &skip)?;
        match self.boot.sigma_mode {
            SigmaMode::Recompute => Ok(statistic_from_residuals(&residuals, &diagnostics, self.opts)?.3),
            SigmaMode::FixedObserved => {
                let pooled = PooledSample::with_lambda_floor(&residuals, self.opts.lambda_floor)?;
                let t = linear_statistics(&pooled, self.opts.score)?;
                let mu = vec![self.opts.score.finite_null_mean(pooled.total()); k];
                quadratic_statistic(&t, &mu, self.observed_sigma, pooled.total())
            }
        }
    }

    /// One attempt on the primary stream, one retry on a fresh stream.
    fn replicate_with_retry(&self, seed: &StreamSeed, b: u32) -> Option<f64> {
        self.replicate(&seed.child(0), b)
            .or_else(|_| self.replicate(&seed.child(1), b))
            .ok()
            .filter(|v| v.is_finite())
    }
}

/// Smoothed parametric bootstrap test. Each replicate simulates every group
/// from its fitted model, refits, and recomputes T̂*, Σ̂* and L̂*.
pub fn bootstrap_test(
    samples: &[Vec<f64>],
    orders: &[(usize, usize)],
    opts: &TestOptions,
    boot: &BootstrapOptions,
) -> Result<BootstrapResult> {
    if boot.replicates < 99 {
        return Err(GarchError::InvalidInput(format!(
            "bootstrap needs at least 99 replicates, got {}",
            boot.replicates
        )));
    }
    let observed = asymptotic_test(samples, orders, opts)?;
    let standardized = observed
        .fits
        .iter()
        .map(|f| {
            let n = f.residuals.len() as f64;
            let m2 = f.residuals.iter().map(|e| e * e).sum::<f64>() / n;
            f.residuals.iter().map(|e| e / m2.sqrt()).collect()
        })
        .collect();
    let ctx = ReplicateContext {
        fits: &observed.fits,
        standardized,
        observed_sigma: &observed.sigma_hat,
        opts,
        boot,
    };
    let seed = StreamSeed::new(boot.seed);
    let run = || -> Vec<Option<f64>> {
        (0..boot.replicates as u32)
            .into_par_iter()
            .map(|b| ctx.replicate_with_retry(&seed, b))
            .collect()
    };
    let draws = match boot.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| GarchError::InvalidInput(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    let replicates: Vec<f64> = draws.iter().flatten().copied().collect();
    let dropped = boot.replicates - replicates.len();
    if replicates.is_empty() {
        return Err(GarchError::FitFailure {
            reason: "every bootstrap replicate failed".into(),
            best_objective: f64::INFINITY,
            best_params: Vec::new(),
        });
    }
    let warning = (dropped * 10 > boot.replicates).then(|| {
        format!("{dropped} of {} bootstrap replicates failed and were dropped", boot.replicates)
    });
    let p_bootstrap = bootstrap_p_value(&replicates, observed.l_n);
    let critical_value = bootstrap_critical_value(&replicates, opts.level);
    let reject = observed.l_n > critical_value;
    Ok(BootstrapResult {
        replicates,
        p_bootstrap,
        critical_value,
        reject,
        b: boot.replicates,
        dropped,
        n0: boot.warmup,
        seed: boot.seed,
        warning,
        observed,
    })
}

/// Both sides of B̂(x) = ℰ(x) + Â x f(x) + ξ̂(x) on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionRecord {
    pub grid: Vec<f64>,
    /// √n (F̂_ε̂ − F).
    pub b_hat: Vec<f64>,
    /// √n (F_n,ε − F).
    pub e_hat: Vec<f64>,
    /// Â x f(x).
    pub drift: Vec<f64>,
    pub a_hat: f64,
    /// sup_x |B̂ − ℰ − Â x f|.
    pub sup_remainder: f64,
}

/// Evaluate the residual-empirical-process decomposition for a simulated
/// sample whose true parameters θ₀ and innovation law are known.
pub fn decompose_diagnostic(
    sample: &SimulatedSample,
    theta0: &GarchSpec,
    dist: &InnovationDist,
    fitted: &FitResult,
    grid: &[f64],
) -> Result<DecompositionRecord> {
    let n = sample.values.len();
    if fitted.residuals.len() != n || sample.innovations.len() != n {
        return Err(GarchError::LengthMismatch { expected: n, got: fitted.residuals.len() });
    }
    let tau = crate::qml::estimate_tau(fitted, &sample.values)?;
    let root_n = (n as f64).sqrt();
    let a_hat: f64 = fitted
        .spec_hat
        .params()
        .iter()
        .zip(theta0.params())
        .zip(&tau)
        .map(|((h, t), w)| root_n * (h - t) * w)
        .sum();
    let resid = Ecdf::new(&fitted.residuals)?;
    let innov = Ecdf::new(&sample.innovations)?;
    let mut rec = DecompositionRecord {
        grid: grid.to_vec(),
        b_hat: Vec::with_capacity(grid.len()),
        e_hat: Vec::with_capacity(grid.len()),
        drift: Vec::with_capacity(grid.len()),
        a_hat,
        sup_remainder: 0.0,
    };
    for &x in grid {
        let f = dist.cdf(x);
        let b = root_n * (resid.eval(x) - f);
        let e = root_n * (innov.eval(x) - f);
        let d = if x.is_finite() { a_hat * x * dist.pdf(x) } else { 0.0 };
        rec.sup_remainder = rec.sup_remainder.max((b - e - d).abs());
        rec.b_hat.push(b);
        rec.e_hat.push(e);
        rec.drift.push(d);
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_value_counts_ties_and_adds_one() {
        let reps = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(bootstrap_p_value(&reps, 3.0), 3.0 / 5.0);
        assert_eq!(bootstrap_p_value(&reps, 10.0), 1.0 / 5.0);
        assert_eq!(bootstrap_p_value(&reps, 0.0), 1.0);
    }

    #[test]
    fn critical_value_is_upper_quantile() {
        let reps: Vec<f64> = (1..=101).map(f64::from).collect();
        assert_eq!(bootstrap_critical_value(&reps, 0.05), 96.0);
    }

    #[test]
    fn reference_dof() {
        assert_eq!(ReferenceDof::Contrast.dof(3), 2);
        assert_eq!(ReferenceDof::Nominal.dof(3), 3);
    }

    #[test]
    fn bootstrap_requires_enough_replicates() {
        let boot = BootstrapOptions { replicates: 50, ..Default::default() };
        let err = bootstrap_test(&[vec![0.0; 100], vec![0.0; 100]], &[(1, 1), (1, 1)], &TestOptions::default(), &boot);
        assert!(matches!(err, Err(GarchError::InvalidInput(_))));
    }
}
