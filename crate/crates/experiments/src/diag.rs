//! Simulation diagnostics: the residual-empirical-process remainder as n
//! grows, and the √n rate of the QML estimator.

use garch_ksample::garch::simulate_with_rng;
use garch_ksample::{decompose_diagnostic, fit, FitOptions, GarchSpec, InnovationDist, Result, StreamSeed};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const DIAG_SCHEMA: &str = "garch-ksample/diagnostic/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderSummary {
    pub n: usize,
    pub median_sup: f64,
    pub mean_sup: f64,
    pub median_abs_a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSweep {
    pub schema: String,
    pub spec: GarchSpec,
    pub reps: usize,
    pub seed: u64,
    pub summaries: Vec<RemainderSummary>,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

/// Evaluation grid on [−4, 4] in steps of 0.01.
pub fn default_grid() -> Vec<f64> {
    (-400..=400).map(|i| i as f64 / 100.0).collect()
}

/// Median sup-norm of the remainder ξ̂ over `reps` Gaussian-innovation
/// paths for each n.
pub fn decomposition_sweep(spec: &GarchSpec, ns: &[usize], reps: usize, n0: usize, seed: u64) -> Result<DecompositionSweep> {
    let dist = InnovationDist::StandardNormal;
    let grid = default_grid();
    let root = StreamSeed::new(seed);
    let mut summaries = Vec::with_capacity(ns.len());
    for (ni, &n) in ns.iter().enumerate() {
        let stream = root.child(ni as u64);
        let draws: Vec<(f64, f64)> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream.rng(0, r as u32);
                let sample = simulate_with_rng(spec, &dist, n, n0, &mut rng)?;
                let fitted = fit(&sample.values, spec.p(), spec.q(), &FitOptions::default())?;
                let rec = decompose_diagnostic(&sample, spec, &dist, &fitted, &grid)?;
                Ok((rec.sup_remainder, rec.a_hat.abs()))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut sups: Vec<f64> = draws.iter().map(|d| d.0).collect();
        let mut a: Vec<f64> = draws.iter().map(|d| d.1).collect();
        let mean_sup = sups.iter().sum::<f64>() / sups.len() as f64;
        summaries.push(RemainderSummary { n, median_sup: median(&mut sups), mean_sup, median_abs_a: median(&mut a) });
    }
    Ok(DecompositionSweep { schema: DIAG_SCHEMA.into(), spec: spec.clone(), reps, seed, summaries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub median_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudy {
    pub points: Vec<RatePoint>,
    /// Least-squares slope of log median ‖θ̂ − θ₀‖ on log n.
    pub slope: f64,
}

pub fn qml_rate_study(spec: &GarchSpec, ns: &[usize], reps: usize, n0: usize, seed: u64) -> Result<RateStudy> {
    let root = StreamSeed::new(seed);
    let theta0 = spec.params();
    let mut points = Vec::with_capacity(ns.len());
    for (ni, &n) in ns.iter().enumerate() {
        let stream = root.child(ni as u64);
        let mut errs = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream.rng(0, r as u32);
                let sample = simulate_with_rng(spec, &InnovationDist::StandardNormal, n, n0, &mut rng)?;
                let f = fit(&sample.values, spec.p(), spec.q(), &FitOptions::default())?;
                Ok(f.spec_hat.params().iter().zip(&theta0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            })
            .collect::<Result<Vec<f64>>>()?;
        points.push(RatePoint { n, median_error: median(&mut errs) });
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.median_error.ln()).collect();
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(RateStudy { points, slope: sxy / sxx })
}
