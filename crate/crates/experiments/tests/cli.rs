use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_garch-ksample"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn simulate_to(path: &Path, dgp: &str, dist: &str, n: usize, seed: u64) {
    let out = run(&[
        "simulate", "--dgp", dgp, "--dist", dist, "--n", &n.to_string(), "--seed", &seed.to_string(), "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--n", "10"]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--n", "10", "--seed", "1", "--dgp", "dgp9"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    simulate_to(&a, "dgp1", "normal", 200, 1);
    let a = a.to_str().unwrap();
    assert_eq!(run(&["test", a, a, "--score", "median"]).status.code(), Some(1));
    assert_eq!(run(&["test", a, a, "--bootstrap", "10"]).status.code(), Some(1));
}

#[test]
fn compute_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short.csv");
    simulate_to(&short, "dgp1", "normal", 30, 1);
    let out = run(&["fit", short.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    assert_eq!(run(&["fit", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn simulate_is_reproducible() {
    let a = run(&["simulate", "--n", "50", "--seed", "4", "--dist", "t:0.2"]);
    let b = run(&["simulate", "--n", "50", "--seed", "4", "--dist", "t:0.2"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 51);
    assert!(text.starts_with("x,sigma2,eps"));
    let j = json(&run(&["simulate", "--n", "20", "--seed", "4", "--format", "json"]));
    assert_eq!(j["values"].as_array().unwrap().len(), 20);
}

#[test]
fn fit_recovers_second_design() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.csv");
    simulate_to(&p, "dgp2", "normal", 4000, 17);
    let j = json(&run(&["fit", p.to_str().unwrap(), "--column", "x"]));
    let spec = &j["fit"]["spec_hat"];
    let alpha = spec["alpha"][0].as_f64().unwrap();
    let beta = spec["beta"][0].as_f64().unwrap();
    assert!((alpha - 0.4).abs() < 0.08 && (beta - 0.4).abs() < 0.1, "{spec}");
    assert!(j["lyapunov_gaussian"]["gamma"].as_f64().unwrap() < 0.0);
}

#[test]
fn test_command_reports_statistic() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<String> = (0..3)
        .map(|j| {
            let p = dir.path().join(format!("g{j}.csv"));
            simulate_to(&p, "dgp1", if j == 2 { "mixture:0.3" } else { "normal" }, 150, 30 + j);
            p.to_str().unwrap().to_string()
        })
        .collect();
    let mut args = vec!["test"];
    args.extend(files.iter().map(String::as_str));
    args.extend(["--score", "vdw"]);
    let j = json(&run(&args));
    assert_eq!(j["dof"], 2);
    assert_eq!(j["T"].as_array().unwrap().len(), 3);
    assert!(j["L_N"].as_f64().unwrap() >= 0.0);
    assert!(j["p_bootstrap"].is_null());
    args.extend(["--bootstrap", "99", "--seed", "3", "--fixed-sigma"]);
    let b = json(&run(&args));
    let p = b["p_bootstrap"].as_f64().unwrap();
    assert!((0.01..=1.0).contains(&p));
    assert_eq!(b["L_N"], j["L_N"]);
}

#[test]
fn mc_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.cfg");
    std::fs::write(&cfg, "phi = 0\nn = 100\ntrials = 4\n").unwrap();
    let out_path = dir.path().join("report.json");
    let out = run(&["mc", "--config", cfg.to_str().unwrap(), "--seed", "5", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 5);
    assert_eq!(report["total_trials"], 4);
    std::fs::write(&cfg, "phi = 0\nlevel = 2\n").unwrap();
    assert_eq!(run(&["mc", "--config", cfg.to_str().unwrap(), "--seed", "5"]).status.code(), Some(1));
}

#[test]
fn bootstrap_smoke_contract() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<String> = ["a", "b", "c"]
        .iter()
        .enumerate()
        .map(|(j, n)| {
            let p = dir.path().join(format!("{n}.csv"));
            simulate_to(&p, "dgp1", "normal", 100, 70 + j as u64);
            p.to_str().unwrap().to_string()
        })
        .collect();
    let mut args = vec!["test"];
    args.extend(files.iter().map(String::as_str));
    args.extend(["--score", "wilcoxon", "--level", "0.05", "--seed", "7", "--bootstrap", "199"]);
    let j = json(&run(&args));
    for key in ["T", "L_N", "p_asymptotic", "p_bootstrap", "sigma_hat", "reject"] {
        assert!(!j[key].is_null(), "missing {key}");
    }
    assert_eq!(j["sigma_hat"]["matrix"].as_array().unwrap().len(), 3);
}

#[test]
fn mc_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.cfg");
    std::fs::write(&cfg, "dgp = dgp1\nphi = 0, 1/3\nn = 100\ntrials = 6\nscore = wilcoxon, vdw\n").unwrap();
    let first = run(&["mc", "--config", cfg.to_str().unwrap(), "--seed", "1"]);
    let second = bin()
        .args(["mc", "--config", cfg.to_str().unwrap(), "--seed", "1"])
        .env("GARCH_KSAMPLE_WORKERS", "2")
        .output()
        .unwrap();
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    assert!(String::from_utf8_lossy(&first.stderr).contains("DGP1"));
}

#[test]
fn fit_on_first_design_lands_near_truth() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("sim.csv");
    simulate_to(&p, "dgp1", "normal", 4000, 23);
    let j = json(&run(&["fit", p.to_str().unwrap(), "--orders", "1,1"]));
    let spec = &j["fit"]["spec_hat"];
    let theta = [spec["omega"].as_f64().unwrap(), spec["alpha"][0].as_f64().unwrap(), spec["beta"][0].as_f64().unwrap()];
    // β is weakly identified when α and β are both small, so its band is wide
    assert!((theta[0] - 0.1).abs() < 0.05 && (theta[1] - 0.1).abs() < 0.05 && (theta[2] - 0.1).abs() < 0.35, "{theta:?}");
}

#[test]
fn fixtures_run_through_the_test_command() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let files: Vec<String> = ["alpha", "beta", "gamma"]
        .iter()
        .map(|n| dir.join(format!("synthetic_{n}.csv")).to_str().unwrap().to_string())
        .collect();
    let mut args = vec!["test"];
    args.extend(files.iter().map(String::as_str));
    args.extend(["--column", "close", "--prices", "--tail", "2000", "--score", "klotz"]);
    let j = json(&run(&args));
    assert_eq!(j["dof"], 2);
    assert!(j["fits"].as_array().unwrap().iter().all(|f| f["converged"].as_bool().unwrap()));
}
