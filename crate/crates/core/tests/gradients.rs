use garch_ksample::garch::{simulate, volatility_gradient, volatility_recursion, GarchSpec, InitRule, InnovationDist};
use garch_ksample::qml::{negative_quasi_loglik, negative_quasi_loglik_gradient};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const INSTANCES: usize = 20;
const REL_TOL: f64 = 1e-5;

fn random_spec(rng: &mut ChaCha8Rng) -> GarchSpec {
    let p = rng.random_range(1..=2);
    let q = rng.random_range(0..=2);
    let omega = rng.random_range(0.05..1.0);
    let alpha: Vec<f64> = (0..p).map(|_| rng.random_range(0.02..0.25) / p as f64).collect();
    let beta: Vec<f64> = (0..q).map(|_| rng.random_range(0.1..0.7) / q as f64).collect();
    GarchSpec::new(omega, alpha, beta).unwrap()
}

fn perturbed(spec: &GarchSpec, k: usize, h: f64) -> GarchSpec {
    let mut theta = spec.params();
    theta[k] += h;
    GarchSpec::from_params(spec.p(), spec.q(), &theta).unwrap()
}

fn step(v: f64) -> f64 {
    1e-6 * v.abs().max(1e-2)
}

fn instances() -> Vec<(GarchSpec, Vec<f64>, InitRule)> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    (0..INSTANCES)
        .map(|i| {
            let spec = random_spec(&mut rng);
            let x = simulate(&spec, &InnovationDist::StandardNormal, 300, 200, 1000 + i as u64).unwrap().values;
            let init = if i % 2 == 0 { InitRule::OmegaInit } else { InitRule::FirstSquaredInit };
            (spec, x, init)
        })
        .collect()
}

#[test]
fn volatility_gradient_matches_central_differences() {
    for (i, (spec, x, init)) in instances().into_iter().enumerate() {
        let sigma2 = volatility_recursion(&spec, &x, init).unwrap();
        let grads = volatility_gradient(&spec, &x, &sigma2, init).unwrap();
        let theta = spec.params();
        for k in 0..theta.len() {
            let h = step(theta[k]);
            let up = volatility_recursion(&perturbed(&spec, k, h), &x, init).unwrap();
            let down = volatility_recursion(&perturbed(&spec, k, -h), &x, init).unwrap();
            // floor the denominator where the derivative itself is near zero
            let col_scale = grads.iter().fold(0.0f64, |m, g| m.max(g[k].abs()));
            let mut worst = 0.0f64;
            for t in 0..x.len() {
                let fd = (up[t] - down[t]) / (2.0 * h);
                let err = (grads[t][k] - fd).abs() / fd.abs().max(1e-3 * col_scale);
                worst = worst.max(err);
            }
            assert!(worst < REL_TOL, "instance {i} ({spec:?}, {init:?}) coordinate {k}: {worst:e}");
        }
    }
}

#[test]
fn quasi_likelihood_gradient_matches_central_differences() {
    for (i, (spec, x, init)) in instances().into_iter().enumerate() {
        let (f, grad) = negative_quasi_loglik_gradient(&spec, &x, init).unwrap();
        assert!((f - negative_quasi_loglik(&spec, &x, init).unwrap()).abs() < 1e-12);
        let theta = spec.params();
        let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        for k in 0..theta.len() {
            let h = step(theta[k]);
            let fd = (negative_quasi_loglik(&perturbed(&spec, k, h), &x, init).unwrap()
                - negative_quasi_loglik(&perturbed(&spec, k, -h), &x, init).unwrap())
                / (2.0 * h);
            let err = (grad[k] - fd).abs() / fd.abs().max(1e-3 * scale).max(1e-10);
            assert!(err < REL_TOL, "instance {i} ({spec:?}, {init:?}) coordinate {k}: {err:e}");
        }
    }
}
