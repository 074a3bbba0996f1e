use clap::{Args, Parser, Subcommand, ValueEnum};
use garch_ksample::garch::{lyapunov_exponent, simulate};
use garch_ksample::ksample::{BootstrapInnovations, SigmaMode};
use garch_ksample::{
    asymptotic_test, bootstrap_test, fit, BootstrapOptions, FitOptions, GarchSpec, InitRule,
    InnovationDist, ModelDiagnostics, ReferenceDof, ScoreFunction, TestOptions,
};
use garch_ksample_experiments::config::{parse_number, Dgp, StudyConfig};
use garch_ksample_experiments::data::{write_columns_csv, DataError};
use garch_ksample_experiments::diag::{decomposition_sweep, qml_rate_study};
use garch_ksample_experiments::{ingest_csv, render_table, run_study, Column, IngestOptions, SeriesKind};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const TEST_SCHEMA: &str = "garch-ksample/test-result/v1";
const FIT_SCHEMA: &str = "garch-ksample/fit-result/v1";

#[derive(Parser)]
#[command(name = "garch-ksample", version, about = "k-sample rank tests for GARCH innovation distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a GARCH path to CSV or JSON.
    Simulate(SimulateArgs),
    /// Fit a GARCH model to one CSV series.
    Fit(FitArgs),
    /// Test equality of innovation distributions across k series.
    Test(TestArgs),
    /// Run a Monte Carlo study from a config file.
    Mc(McArgs),
    /// Residual-process remainder and QML rate diagnostics.
    Diag(DiagArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// dgp1, dgp2 or garch:ω/α1;…/β1;…
    #[arg(long, default_value = "dgp1")]
    dgp: String,
    /// normal, mixture:φ or t:φ
    #[arg(long, default_value = "normal")]
    dist: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 500)]
    n0: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Column name or zero-based index.
    #[arg(long, default_value = "0")]
    column: String,
    /// Treat the column as prices and convert to log-returns.
    #[arg(long)]
    prices: bool,
    /// Keep only the last N observations.
    #[arg(long)]
    tail: Option<usize>,
}

impl InputArgs {
    fn options(&self) -> IngestOptions {
        let column = match self.column.parse::<usize>() {
            Ok(i) => Column::Index(i),
            Err(_) => Column::Name(self.column.clone()),
        };
        IngestOptions {
            column,
            kind: if self.prices { SeriesKind::Prices } else { SeriesKind::Returns },
            tail: self.tail,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Init {
    Omega,
    FirstSquared,
}

#[derive(Args)]
struct FitArgs {
    file: PathBuf,
    #[arg(long, default_value = "1,1")]
    orders: String,
    #[arg(long, value_enum, default_value_t = Init::Omega)]
    init: Init,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Reference {
    Contrast,
    Nominal,
}

#[derive(Args)]
struct TestArgs {
    #[arg(required = true, num_args = 2..)]
    files: Vec<PathBuf>,
    #[arg(long, default_value = "wilcoxon")]
    score: String,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    /// Bootstrap replicates B (0 = asymptotic test only).
    #[arg(long, default_value_t = 0)]
    bootstrap: usize,
    #[arg(long, default_value_t = 500)]
    n0: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// p,q for all groups, or repeated once per group.
    #[arg(long, default_value = "1,1")]
    orders: Vec<String>,
    #[arg(long, value_enum, default_value_t = Reference::Contrast)]
    reference: Reference,
    /// Reuse the observed Σ̂ in bootstrap replicates.
    #[arg(long)]
    fixed_sigma: bool,
    /// Resample standardized residuals instead of Gaussian innovations.
    #[arg(long)]
    resample_residuals: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    /// JSON report path; stdout when absent (the table then goes to stderr).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagArgs {
    #[arg(long, default_value = "dgp1")]
    dgp: String,
    #[arg(long, value_delimiter = ',', default_value = "250,1000")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 500)]
    n0: usize,
    #[arg(long)]
    seed: u64,
    /// Also report the QML error rate over the same lengths.
    #[arg(long)]
    rate: bool,
}

enum CliError {
    Usage(String),
    Compute(String),
}

impl From<garch_ksample::GarchError> for CliError {
    fn from(e: garch_ksample::GarchError) -> Self {
        let mut msg = e.to_string();
        let mut cur = std::error::Error::source(&e);
        while let Some(inner) = cur {
            msg.push_str(": ");
            msg.push_str(&inner.to_string());
            cur = inner.source();
        }
        CliError::Compute(msg)
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Usage(e.to_string())
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn parse_orders(s: &str) -> Result<(usize, usize), CliError> {
    let v: Vec<&str> = s.split(',').collect();
    if v.len() != 2 {
        return Err(CliError::Usage(format!("orders must be p,q, got '{s}'")));
    }
    let p = v[0].trim().parse().map_err(|_| CliError::Usage(format!("bad order '{s}'")))?;
    let q = v[1].trim().parse().map_err(|_| CliError::Usage(format!("bad order '{s}'")))?;
    Ok((p, q))
}

fn parse_dist(s: &str) -> Result<InnovationDist, CliError> {
    let (name, arg) = s.split_once(':').unwrap_or((s, ""));
    let phi = || parse_number(arg).map_err(CliError::Usage);
    Ok(match name.trim().to_ascii_lowercase().as_str() {
        "normal" => InnovationDist::StandardNormal,
        "mixture" => InnovationDist::mixture(phi()?).map_err(usage)?,
        "t" => InnovationDist::student_t(phi()?).map_err(usage)?,
        other => return Err(CliError::Usage(format!("unknown distribution '{other}'"))),
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Usage(format!("write {}: {e}", p.display()))),
        None => write_stdout(&format!("{text}\n")),
    }
}

/// Write to stdout, treating a closed pipe as success.
fn write_stdout(text: &str) -> Result<(), CliError> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Compute(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Compute(e.to_string()))
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), CliError> {
    let spec = a.dgp.parse::<Dgp>().map_err(CliError::Usage)?.spec();
    let dist = parse_dist(&a.dist)?;
    let sample = simulate(&spec, &dist, a.n, a.n0, a.seed)?;
    match a.format {
        Format::Json => emit(a.out.as_deref(), &to_json(&sample)?),
        Format::Csv => match a.out {
            Some(p) => Ok(write_columns_csv(
                &p,
                &[("x", &sample.values), ("sigma2", &sample.volatilities), ("eps", &sample.innovations)],
            )?),
            None => {
                let mut s = String::from("x,sigma2,eps\n");
                for i in 0..sample.values.len() {
                    s.push_str(&format!("{},{},{}\n", sample.values[i], sample.volatilities[i], sample.innovations[i]));
                }
                write_stdout(&s)
            }
        },
    }
}

fn cmd_fit(a: FitArgs) -> Result<(), CliError> {
    let series = ingest_csv(&a.file, &a.input.options())?;
    let (p, q) = parse_orders(&a.orders)?;
    let init = match a.init {
        Init::Omega => InitRule::OmegaInit,
        Init::FirstSquared => InitRule::FirstSquaredInit,
    };
    let f = fit(&series.values, p, q, &FitOptions { init_rule: init, ..Default::default() })?;
    let diag = ModelDiagnostics::compute(&f, &series.values)?;
    let lyap = lyapunov_exponent(&f.spec_hat, &InnovationDist::StandardNormal, 2000, 20, 0)?;
    let out = json!({
        "schema": FIT_SCHEMA,
        "n": series.values.len(),
        "dropped_rows": series.dropped,
        "fit": f,
        "diagnostics": diag,
        "lyapunov_gaussian": lyap,
    });
    emit(None, &to_json(&out)?)
}

fn cmd_test(a: TestArgs) -> Result<(), CliError> {
    let score: ScoreFunction = a.score.parse().map_err(usage)?;
    let samples = a
        .files
        .iter()
        .map(|f| ingest_csv(f, &a.input.options()).map(|s| s.values))
        .collect::<Result<Vec<_>, _>>()?;
    let k = samples.len();
    let orders: Vec<(usize, usize)> = match a.orders.len() {
        1 => vec![parse_orders(&a.orders[0])?; k],
        m if m == k => a.orders.iter().map(|s| parse_orders(s)).collect::<Result<_, _>>()?,
        m => return Err(CliError::Usage(format!("{m} --orders values for {k} series"))),
    };
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(CliError::Usage(format!("level {} outside (0,1)", a.level)));
    }
    let opts = TestOptions {
        score,
        level: a.level,
        reference: match a.reference {
            Reference::Contrast => ReferenceDof::Contrast,
            Reference::Nominal => ReferenceDof::Nominal,
        },
        ..Default::default()
    };
    let (observed, boot) = if a.bootstrap > 0 {
        if a.bootstrap < 99 {
            return Err(CliError::Usage("--bootstrap needs at least 99 replicates".into()));
        }
        let b = bootstrap_test(
            &samples,
            &orders,
            &opts,
            &BootstrapOptions {
                replicates: a.bootstrap,
                warmup: a.n0,
                seed: a.seed,
                innovations: if a.resample_residuals {
                    BootstrapInnovations::ResidualResample
                } else {
                    BootstrapInnovations::Gaussian
                },
                sigma_mode: if a.fixed_sigma { SigmaMode::FixedObserved } else { SigmaMode::Recompute },
                workers: a.workers,
            },
        )?;
        (b.observed.clone(), Some(b))
    } else {
        (asymptotic_test(&samples, &orders, &opts)?, None)
    };
    let out = json!({
        "schema": TEST_SCHEMA,
        "score": score,
        "level": a.level,
        "T": observed.t,
        "mu": observed.mu,
        "L_N": observed.l_n,
        "dof": observed.dof,
        "p_asymptotic": observed.p_asymptotic,
        "p_bootstrap": boot.as_ref().map(|b| b.p_bootstrap),
        "critical_value": boot.as_ref().map(|b| b.critical_value),
        "bootstrap_dropped": boot.as_ref().map(|b| b.dropped),
        "bootstrap_warning": boot.as_ref().and_then(|b| b.warning.clone()),
        "sigma_hat": observed.sigma_hat,
        "reject": boot.as_ref().map_or(observed.reject, |b| b.reject),
        "reject_asymptotic": observed.reject,
        "fits": observed.fits,
    });
    emit(None, &to_json(&out)?)
}

fn cmd_mc(a: McArgs) -> Result<(), CliError> {
    let mut cfg = StudyConfig::from_file(&a.config).map_err(usage)?;
    cfg.seed = a.seed;
    let report = run_study(&cfg).map_err(|e| match e {
        garch_ksample_experiments::study::StudyError::Config(c) => CliError::Usage(c.to_string()),
        other => CliError::Compute(other.to_string()),
    })?;
    let text = to_json(&report)?;
    let table = render_table(&report);
    match a.out {
        Some(p) => {
            emit(Some(&p), &text)?;
            write_stdout(&table)?;
        }
        None => {
            write_stdout(&format!("{text}\n"))?;
            eprint!("{table}");
        }
    }
    Ok(())
}

fn cmd_diag(a: DiagArgs) -> Result<(), CliError> {
    let spec: GarchSpec = a.dgp.parse::<Dgp>().map_err(CliError::Usage)?.spec();
    if a.n.is_empty() || a.reps == 0 {
        return Err(CliError::Usage("need at least one length and one replicate".into()));
    }
    let sweep = decomposition_sweep(&spec, &a.n, a.reps, a.n0, a.seed)?;
    let rate = if a.rate { Some(qml_rate_study(&spec, &a.n, a.reps, a.n0, a.seed)?) } else { None };
    emit(None, &to_json(&json!({ "decomposition": sweep, "rate": rate }))?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Test(a) => cmd_test(a),
        Command::Mc(a) => cmd_mc(a),
        Command::Diag(a) => cmd_diag(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Compute(m)) => {
            eprintln!("computation failed: {m}");
            ExitCode::from(2)
        }
    }
}
