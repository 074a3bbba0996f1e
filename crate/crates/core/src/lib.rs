//! Residual-based k-sample rank tests for the innovation distributions of
//! independently observed GARCH(p,q) processes.
//!
//! The crate is organised bottom-up:
//!
//! - [`garch`]: model specification, volatility recursion, simulation,
//!   volatility gradients and Lyapunov-exponent diagnostics.
//! - [`qml`]: Gaussian quasi-maximum-likelihood fitting and the per-model
//!   plug-in quantities (Û, τ̂, κ̂, δ̂) consumed by the covariance estimator.
//! - [`ranks`]: score-generating functions, empirical distribution functions
//!   and the linear rank statistics T̂_jN.
//! - [`covariance`]: plug-in estimate Σ̂_N of the dispersion matrix of
//!   √N(T̂ − μ).
//! - [`ksample`]: the asymptotic χ² test, the smoothed parametric bootstrap
//!   test and the residual-empirical-process decomposition diagnostic.
//!
//! Supporting modules: [`special`] (normal and χ² special functions),
//! [`rng`] (counter-based splittable random streams), [`optim`] (BFGS) and
//! [`kde`] (Gaussian kernel density estimation).

pub mod covariance;
pub mod error;
pub mod garch;
pub mod kde;
pub mod ksample;
pub mod optim;
pub mod qml;
pub mod ranks;
pub mod rng;
pub mod special;

pub use covariance::{assemble_sigma, CovarianceInputs, SigmaComponents, SigmaHat};
pub use error::{GarchError, Result};
pub use garch::{
    lyapunov_exponent, simulate, volatility_gradient, volatility_recursion, GarchSpec, InitRule,
    InnovationDist, LyapunovEstimate, SimulatedSample,
};
pub use ksample::{
    asymptotic_test, bootstrap_test, chi2_survival, decompose_diagnostic, BootstrapOptions,
    BootstrapResult, DecompositionRecord, ReferenceDof, TestOptions, TestResult,
};
pub use qml::{fit, negative_quasi_loglik, FitOptions, FitResult, ModelDiagnostics};
pub use ranks::{Ecdf, PooledSample, ScoreFunction};
pub use rng::StreamSeed;
