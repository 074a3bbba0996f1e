//! Study configuration: a flat `key = value` text format.
//!
//! ```text
//! # DGP 1 size/power grid
//! dgp = dgp1, dgp2            # or garch:0.1/0.1/0.1, garch:ω/α1;α2/β1
//! phi = 0, 1/9, 1/5, 1/3
//! n = 100
//! trials = 500
//! bootstrap = 0               # B; 0 runs the asymptotic test only
//! n0 = 500
//! level = 0.05
//! score = wilcoxon, vdw
//! seed = 1
//! workers = 8
//! reference = contrast        # or nominal
//! group_dists = normal, mixture, t
//! fit_orders = 1,1
//! sigma_mode = recompute      # or fixed
//! asymptotic = true
//! keep_trials = false
//! ```
//!
//! Lists are comma-separated; `#` starts a comment. The worker count can
//! be overridden with the `GARCH_KSAMPLE_WORKERS` environment variable.

use garch_ksample::ksample::SigmaMode;
use garch_ksample::{GarchSpec, InnovationDist, ReferenceDof, ScoreFunction};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

pub const WORKERS_ENV: &str = "GARCH_KSAMPLE_WORKERS";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("key '{key}': {msg}")]
    Value { key: String, msg: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read config: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Dgp {
    Dgp1,
    Dgp2,
    Custom { spec: GarchSpec },
}

impl Dgp {
    pub fn spec(&self) -> GarchSpec {
        match self {
            Dgp::Dgp1 => GarchSpec::dgp1(),
            Dgp::Dgp2 => GarchSpec::dgp2(),
            Dgp::Custom { spec } => spec.clone(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Dgp::Dgp1 => "DGP1".into(),
            Dgp::Dgp2 => "DGP2".into(),
            Dgp::Custom { spec } => format!(
                "GARCH({},{}) omega={} alpha={:?} beta={:?}",
                spec.p(),
                spec.q(),
                spec.omega(),
                spec.alpha(),
                spec.beta()
            ),
        }
    }
}

impl FromStr for Dgp {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "dgp1" => return Ok(Dgp::Dgp1),
            "dgp2" => return Ok(Dgp::Dgp2),
            _ => {}
        }
        let body = s
            .strip_prefix("garch:")
            .ok_or_else(|| format!("expected dgp1, dgp2 or garch:ω/α…/β…, got '{s}'"))?;
        let parts: Vec<&str> = body.split('/').collect();
        if parts.len() != 3 {
            return Err(format!("garch spec needs ω/α/β, got '{body}'"));
        }
        let list = |p: &str| -> Result<Vec<f64>, String> {
            if p.trim().is_empty() {
                return Ok(Vec::new());
            }
            p.split(';').map(parse_number).collect()
        };
        let omega = parse_number(parts[0])?;
        let spec = GarchSpec::new(omega, list(parts[1])?, list(parts[2])?).map_err(|e| e.to_string())?;
        Ok(Dgp::Custom { spec })
    }
}

/// Innovation family of one group; the cell's φ fills in the parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupDist {
    Normal,
    Mixture,
    StudentT,
}

impl GroupDist {
    pub fn at(self, phi: f64) -> garch_ksample::Result<InnovationDist> {
        match self {
            GroupDist::Normal => Ok(InnovationDist::StandardNormal),
            GroupDist::Mixture => InnovationDist::mixture(phi),
            GroupDist::StudentT => InnovationDist::student_t(phi),
        }
    }
}

impl FromStr for GroupDist {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => Ok(GroupDist::Normal),
            "mixture" => Ok(GroupDist::Mixture),
            "t" | "student" | "student_t" => Ok(GroupDist::StudentT),
            other => Err(format!("unknown group distribution '{other}'")),
        }
    }
}

impl fmt::Display for GroupDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupDist::Normal => "normal",
            GroupDist::Mixture => "mixture",
            GroupDist::StudentT => "t",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub dgp: Vec<Dgp>,
    pub phi: Vec<f64>,
    pub n: Vec<usize>,
    pub trials: usize,
    pub bootstrap: usize,
    pub n0: usize,
    pub level: f64,
    pub score: Vec<ScoreFunction>,
    pub seed: u64,
    pub workers: usize,
    pub reference: ReferenceDof,
    pub group_dists: Vec<GroupDist>,
    pub fit_orders: (usize, usize),
    pub sigma_mode: SigmaMode,
    pub asymptotic: bool,
    pub keep_trials: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            dgp: vec![Dgp::Dgp1],
            phi: vec![0.0, 1.0 / 9.0, 0.2, 1.0 / 3.0],
            n: vec![100],
            trials: 500,
            bootstrap: 0,
            n0: 500,
            level: 0.05,
            score: vec![ScoreFunction::Wilcoxon, ScoreFunction::VanDerWaerden],
            seed: 1,
            workers: 1,
            reference: ReferenceDof::Contrast,
            group_dists: vec![GroupDist::Normal, GroupDist::Mixture, GroupDist::StudentT],
            fit_orders: (1, 1),
            sigma_mode: SigmaMode::Recompute,
            asymptotic: true,
            keep_trials: false,
        }
    }
}

/// Decimal or `a/b` fraction.
pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("bad number '{s}'"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("bad number '{s}'"))?;
            a / b
        }
        None => s.parse().map_err(|_| format!("bad number '{s}'"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("non-finite number '{s}'"))
    }
}

fn parse_list<T, F: Fn(&str) -> Result<T, String>>(key: &str, raw: &str, f: F) -> Result<Vec<T>, ConfigError> {
    let items: Result<Vec<T>, String> = raw.split(',').filter(|s| !s.trim().is_empty()).map(|s| f(s.trim())).collect();
    let items = items.map_err(|msg| ConfigError::Value { key: key.into(), msg })?;
    if items.is_empty() {
        return Err(ConfigError::Value { key: key.into(), msg: "empty list".into() });
    }
    Ok(items)
}

fn parse_scalar<T: FromStr>(key: &str, raw: &str) -> Result<T, ConfigError> {
    raw.trim()
        .parse()
        .map_err(|_| ConfigError::Value { key: key.into(), msg: format!("cannot parse '{}'", raw.trim()) })
}

/// Split `dgp` values on commas that are not inside a `garch:` spec.
fn split_dgps(raw: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for piece in raw.split(',') {
        let t = piece.trim();
        let starts_new = t.eq_ignore_ascii_case("dgp1") || t.eq_ignore_ascii_case("dgp2") || t.starts_with("garch:");
        match out.last_mut() {
            Some(last) if !starts_new => {
                last.push(',');
                last.push_str(t);
            }
            _ => out.push(t.to_string()),
        }
    }
    out
}

impl StudyConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut seen = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: idx + 1, msg: "expected key = value".into() })?;
            let key = k.trim().to_ascii_lowercase();
            if seen.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(ConfigError::Syntax { line: idx + 1, msg: format!("duplicate key '{key}'") });
            }
        }
        let mut cfg = StudyConfig::default();
        for (key, raw) in &seen {
            let raw = raw.as_str();
            match key.as_str() {
                "dgp" => {
                    cfg.dgp = split_dgps(raw)
                        .iter()
                        .map(|s| s.parse::<Dgp>())
                        .collect::<Result<_, _>>()
                        .map_err(|msg| ConfigError::Value { key: key.clone(), msg })?
                }
                "phi" => cfg.phi = parse_list(key, raw, parse_number)?,
                "n" => cfg.n = parse_list(key, raw, |s| s.parse().map_err(|_| format!("bad length '{s}'")))?,
                "trials" => cfg.trials = parse_scalar(key, raw)?,
                "bootstrap" | "b" => cfg.bootstrap = parse_scalar(key, raw)?,
                "n0" => cfg.n0 = parse_scalar(key, raw)?,
                "level" | "r" => {
                    cfg.level = parse_number(raw).map_err(|msg| ConfigError::Value { key: key.clone(), msg })?
                }
                "score" => cfg.score = parse_list(key, raw, |s| s.parse().map_err(|e: garch_ksample::GarchError| e.to_string()))?,
                "seed" => cfg.seed = parse_scalar(key, raw)?,
                "workers" => cfg.workers = parse_scalar(key, raw)?,
                "reference" => {
                    cfg.reference = match raw.trim().to_ascii_lowercase().as_str() {
                        "contrast" => ReferenceDof::Contrast,
                        "nominal" => ReferenceDof::Nominal,
                        other => {
                            return Err(ConfigError::Value {
                                key: key.clone(),
                                msg: format!("expected contrast or nominal, got '{other}'"),
                            })
                        }
                    }
                }
                "group_dists" => cfg.group_dists = parse_list(key, raw, |s| s.parse())?,
                "fit_orders" => {
                    let v: Vec<usize> =
                        parse_list(key, raw, |s| s.parse().map_err(|_| format!("bad order '{s}'")))?;
                    if v.len() != 2 {
                        return Err(ConfigError::Value { key: key.clone(), msg: "expected p,q".into() });
                    }
                    cfg.fit_orders = (v[0], v[1]);
                }
                "sigma_mode" => {
                    cfg.sigma_mode = match raw.trim().to_ascii_lowercase().as_str() {
                        "recompute" => SigmaMode::Recompute,
                        "fixed" => SigmaMode::FixedObserved,
                        other => {
                            return Err(ConfigError::Value {
                                key: key.clone(),
                                msg: format!("expected recompute or fixed, got '{other}'"),
                            })
                        }
                    }
                }
                "asymptotic" => cfg.asymptotic = parse_scalar(key, raw)?,
                "keep_trials" => cfg.keep_trials = parse_scalar(key, raw)?,
                _ => return Err(ConfigError::UnknownKey(key.clone())),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be >= 1");
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad("level must lie in (0,1)");
        }
        if self.phi.iter().any(|&p| !(0.0..0.5).contains(&p)) {
            return bad("phi must lie in [0, 1/2)");
        }
        if self.group_dists.len() < 2 {
            return bad("need at least two groups");
        }
        if self.bootstrap != 0 && self.bootstrap < 99 {
            return bad("bootstrap must be 0 or at least 99");
        }
        if !self.asymptotic && self.bootstrap == 0 {
            return bad("nothing to run: asymptotic = false and bootstrap = 0");
        }
        if self.n.iter().any(|&n| n == 0) {
            return bad("sample lengths must be positive");
        }
        Ok(())
    }

    /// Worker count after the environment override.
    pub fn effective_workers(&self) -> usize {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&w| w > 0)
            .unwrap_or(self.workers)
            .max(1)
    }
}
