//! Monte Carlo size/power study over a (DGP × n × φ) grid.

use crate::config::StudyConfig;
use garch_ksample::garch::simulate_with_rng;
use garch_ksample::{
    asymptotic_test, bootstrap_test, BootstrapOptions, GarchError, ScoreFunction, StreamSeed,
    TestOptions,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

pub const REPORT_SCHEMA: &str = "garch-ksample/study-report/v1";
/// Abort when more than this share of trials fail.
pub const MAX_FAILURE_RATE: f64 = 0.20;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid configuration: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("{failed} of {total} trials failed (limit {limit:.0}%); first error: {first}")]
    TooManyFailures { failed: usize, total: usize, limit: f64, first: String },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Asymptotic,
    Bootstrap,
}

/// Outcome of one score on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreOutcome {
    pub score: ScoreFunction,
    #[serde(rename = "L_N")]
    pub l_n: f64,
    pub p_asymptotic: f64,
    pub reject_asymptotic: bool,
    pub p_bootstrap: Option<f64>,
    pub reject_bootstrap: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub outcomes: Vec<ScoreOutcome>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dgp: String,
    pub n: usize,
    pub phi: f64,
    pub score: ScoreFunction,
    pub method: Method,
    pub rejections: usize,
    pub valid_trials: usize,
    pub proportion: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTrials {
    pub dgp: String,
    pub n: usize,
    pub phi: f64,
    pub records: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub schema: String,
    pub config: StudyConfig,
    pub cells: Vec<CellResult>,
    pub failed_trials: usize,
    pub total_trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<Vec<CellTrials>>,
    /// Wall-clock seconds; not serialized so reports stay reproducible.
    #[serde(skip)]
    pub runtime_secs: f64,
}

impl StudyReport {
    pub fn cell(&self, dgp: &str, n: usize, phi: f64, score: ScoreFunction, method: Method) -> Option<&CellResult> {
        self.cells.iter().find(|c| {
            c.dgp == dgp && c.n == n && (c.phi - phi).abs() < 1e-12 && c.score == score && c.method == method
        })
    }
}

fn run_trial(cfg: &StudyConfig, spec: &garch_ksample::GarchSpec, n: usize, phi: f64, stream: &StreamSeed, boot_stream: &StreamSeed, trial: usize) -> TrialRecord {
    let attempt = || -> garch_ksample::Result<Vec<ScoreOutcome>> {
        let samples = cfg
            .group_dists
            .iter()
            .enumerate()
            .map(|(j, g)| {
                let dist = g.at(phi)?;
                let mut rng = stream.rng(j as u32, trial as u32);
                Ok(simulate_with_rng(spec, &dist, n, cfg.n0, &mut rng)?.values)
            })
            .collect::<garch_ksample::Result<Vec<_>>>()?;
        let orders = vec![cfg.fit_orders; samples.len()];
        cfg.score
            .iter()
            .map(|&score| {
                let opts = TestOptions { score, level: cfg.level, reference: cfg.reference, ..Default::default() };
                if cfg.bootstrap > 0 {
                    let boot = BootstrapOptions {
                        replicates: cfg.bootstrap,
                        warmup: cfg.n0,
                        seed: boot_stream.child(trial as u64).master(),
                        sigma_mode: cfg.sigma_mode,
                        workers: None,
                        ..Default::default()
                    };
                    let b = bootstrap_test(&samples, &orders, &opts, &boot)?;
                    Ok(ScoreOutcome {
                        score,
                        l_n: b.observed.l_n,
                        p_asymptotic: b.observed.p_asymptotic,
                        reject_asymptotic: b.observed.reject,
                        p_bootstrap: Some(b.p_bootstrap),
                        reject_bootstrap: Some(b.reject),
                    })
                } else {
                    let r = asymptotic_test(&samples, &orders, &opts)?;
                    Ok(ScoreOutcome {
                        score,
                        l_n: r.l_n,
                        p_asymptotic: r.p_asymptotic,
                        reject_asymptotic: r.reject,
                        p_bootstrap: None,
                        reject_bootstrap: None,
                    })
                }
            })
            .collect()
    };
    match attempt() {
        Ok(outcomes) => TrialRecord { trial, outcomes, error: None },
        Err(e) => TrialRecord { trial, outcomes: Vec::new(), error: Some(describe(&e)) },
    }
}

fn describe(e: &GarchError) -> String {
    let mut s = e.to_string();
    let mut cur: Option<&dyn std::error::Error> = std::error::Error::source(e);
    while let Some(inner) = cur {
        s.push_str(": ");
        s.push_str(&inner.to_string());
        cur = inner.source();
    }
    s
}

fn proportion_cell(dgp: &str, n: usize, phi: f64, score: ScoreFunction, method: Method, records: &[TrialRecord]) -> CellResult {
    let outcomes: Vec<&ScoreOutcome> =
        records.iter().flat_map(|r| r.outcomes.iter().filter(|o| o.score == score)).collect();
    let rejections = outcomes
        .iter()
        .filter(|o| match method {
            Method::Asymptotic => o.reject_asymptotic,
            Method::Bootstrap => o.reject_bootstrap.unwrap_or(false),
        })
        .count();
    let valid = outcomes.len();
    let p = if valid > 0 { rejections as f64 / valid as f64 } else { f64::NAN };
    CellResult {
        dgp: dgp.to_string(),
        n,
        phi,
        score,
        method,
        rejections,
        valid_trials: valid,
        proportion: p,
        std_error: (p * (1.0 - p) / valid as f64).sqrt(),
    }
}

/// Run every cell of the grid. Each trial simulates its groups once and
/// applies every configured score to the same data. Innovation streams are
/// keyed by (n, φ, group, trial), so cells differing only in the DGP share
/// innovations. Output is independent of the worker count.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyReport, StudyError> {
    cfg.validate()?;
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.effective_workers())
        .build()
        .map_err(|e| StudyError::Pool(e.to_string()))?;
    let master = StreamSeed::new(cfg.seed);
    let data_root = master.child(0);
    let boot_root = master.child(1);

    let mut cells = Vec::new();
    let mut all_trials = Vec::new();
    let (mut failed, mut total) = (0usize, 0usize);
    let mut first_error: Option<String> = None;
    for (di, dgp) in cfg.dgp.iter().enumerate() {
        let spec = dgp.spec();
        let label = dgp.label();
        for (ni, &n) in cfg.n.iter().enumerate() {
            for (pi, &phi) in cfg.phi.iter().enumerate() {
                let stream = data_root.child(((ni as u64) << 20) | pi as u64);
                let boot_stream = boot_root.child(((di as u64) << 40) | ((ni as u64) << 20) | pi as u64);
                let records: Vec<TrialRecord> = pool.install(|| {
                    (0..cfg.trials)
                        .into_par_iter()
                        .map(|t| run_trial(cfg, &spec, n, phi, &stream, &boot_stream, t))
                        .collect()
                });
                total += records.len();
                for r in &records {
                    if let Some(e) = &r.error {
                        failed += 1;
                        first_error.get_or_insert_with(|| e.clone());
                    }
                }
                if failed as f64 > MAX_FAILURE_RATE * total as f64 {
                    return Err(StudyError::TooManyFailures {
                        failed,
                        total,
                        limit: 100.0 * MAX_FAILURE_RATE,
                        first: first_error.unwrap_or_default(),
                    });
                }
                for &score in &cfg.score {
                    if cfg.asymptotic {
                        cells.push(proportion_cell(&label, n, phi, score, Method::Asymptotic, &records));
                    }
                    if cfg.bootstrap > 0 {
                        cells.push(proportion_cell(&label, n, phi, score, Method::Bootstrap, &records));
                    }
                }
                if cfg.keep_trials {
                    all_trials.push(CellTrials { dgp: label.clone(), n, phi, records });
                }
            }
        }
    }
    Ok(StudyReport {
        schema: REPORT_SCHEMA.to_string(),
        config: cfg.clone(),
        cells,
        failed_trials: failed,
        total_trials: total,
        trials: cfg.keep_trials.then_some(all_trials),
        runtime_secs: started.elapsed().as_secs_f64(),
    })
}

/// Rejection-rate table: one block per (DGP, method), rows φ, columns n × score.
pub fn render_table(report: &StudyReport) -> String {
    let cfg = &report.config;
    let mut out = String::new();
    let mut methods = Vec::new();
    if cfg.asymptotic {
        methods.push(Method::Asymptotic);
    }
    if cfg.bootstrap > 0 {
        methods.push(Method::Bootstrap);
    }
    for dgp in &cfg.dgp {
        let label = dgp.label();
        for &method in &methods {
            out.push_str(&format!("{label}, {method:?} test, level {}\n", cfg.level));
            let mut header = format!("{:>8}", "phi");
            for &n in &cfg.n {
                for s in &cfg.score {
                    header.push_str(&format!(" | {:>12}", format!("n={n} {}", s.name())));
                }
            }
            out.push_str(&header);
            out.push('\n');
            out.push_str(&"-".repeat(header.len()));
            out.push('\n');
            for &phi in &cfg.phi {
                let mut row = format!("{phi:>8.4}");
                for &n in &cfg.n {
                    for &s in &cfg.score {
                        match report.cell(&label, n, phi, s, method) {
                            Some(c) => row.push_str(&format!(" | {:>12.3}", c.proportion)),
                            None => row.push_str(&format!(" | {:>12}", "-")),
                        }
                    }
                }
                out.push_str(&row);
                out.push('\n');
            }
            out.push('\n');
        }
    }
    out
}
