use approx::assert_abs_diff_eq;
use garch_ksample::special::{chi2_survival, inverse_normal, normal_cdf};
use garch_ksample::ScoreFunction;
use statrs::function::erf::erfc;

// sqrt(2)·erfinv(2u − 1) from mpmath at 40 digits, u taken as the exact f64.
const INVERSE_TABLE: [(f64, f64); 15] = [
    (1e-12, -7.0344838253011319326),
    (1e-09, -5.9978070150076868614),
    (1e-06, -4.7534243088228989573),
    (0.001, -3.0902323061678135354),
    (0.02425, -1.9729610513118848376),
    (0.05, -1.644853626951472688),
    (0.1, -1.2815515655446004353),
    (0.3, -0.52440051270804081597),
    (0.7, 0.52440051270804065631),
    (0.9, 1.2815515655446005935),
    (0.97575, 1.9729610513118849594),
    (0.999, 3.0902323061678132778),
    (0.999999, 4.7534243088170877657),
    (0.999999999, 5.9978070196016374264),
    (0.999999999999, 7.0344869100478352057),
];

// Regularized upper incomplete gamma Q(k/2, x/2) from mpmath.
const CHI2_TABLE: [(f64, usize, f64); 9] = [
    (0.5, 1, 0.47950012218695346232),
    (3.0, 2, 0.22313016014842982893),
    (7.814727903251179, 3, 0.050000000000000017729),
    (1.0, 3, 0.80125195690120080243),
    (20.0, 3, 0.0001697424355528264308),
    (0.1, 4, 0.99879089572574970941),
    (12.0, 5, 0.034787780506241849918),
    (50.0, 10, 2.6690834249044956397e-7),
    (2.5, 7, 0.92709706501347376501),
];

#[test]
fn inverse_normal_matches_high_precision_table() {
    for (u, x) in INVERSE_TABLE {
        assert_abs_diff_eq!(inverse_normal(u).unwrap(), x, epsilon = 1e-12);
    }
}

/// Φ⁻¹ by bisection on erfc, solving in the smaller tail so the target
/// probability is exact.
fn oracle_inverse(u: f64) -> f64 {
    let (target, sign) = if u <= 0.5 { (u, -1.0) } else { (1.0 - u, 1.0) };
    // lower tail mass at -t is 0.5·erfc(t/√2), decreasing in t ≥ 0
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 0.5 * erfc(mid / std::f64::consts::SQRT_2) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    sign * 0.5 * (lo + hi)
}

#[test]
fn inverse_normal_dense_grid() {
    let mut grid: Vec<f64> = (1..=100_000).map(|i| i as f64 / 100_001.0).collect();
    for e in 0..=120 {
        let u = 10f64.powf(-12.0 + e as f64 * 0.0875);
        grid.push(u);
        grid.push(1.0 - u);
    }
    let mut worst = 0.0f64;
    for &u in &grid {
        let err = (inverse_normal(u).unwrap() - oracle_inverse(u)).abs();
        worst = worst.max(err);
    }
    assert!(worst <= 1e-9, "worst inverse-normal error {worst:e}");
}

// mpmath ncdf at 30 digits on a half-integer grid.
const CDF_TABLE: [(f64, f64); 33] = [
    (-8.0, 6.2209605742717841235e-16),
    (-7.5, 3.1908916729108962278e-14),
    (-7.0, 1.2798125438858350044e-12),
    (-6.5, 4.0160005838591178083e-11),
    (-6.0, 9.865876450376981407e-10),
    (-5.5, 1.8989562465887719384e-8),
    (-5.0, 2.8665157187919391167e-7),
    (-4.5, 3.3976731247300604017e-6),
    (-4.0, 0.000031671241833119921254),
    (-3.5, 0.00023262907903552503635),
    (-3.0, 0.0013498980316300945267),
    (-2.5, 0.006209665325776135167),
    (-2.0, 0.0227501319481792072),
    (-1.5, 0.066807201268858066004),
    (-1.0, 0.15865525393145705141),
    (-0.5, 0.30853753872598689636),
    (0.0, 0.5),
    (0.5, 0.69146246127401310364),
    (1.0, 0.84134474606854294859),
    (1.5, 0.933192798731141934),
    (2.0, 0.9772498680518207928),
    (2.5, 0.99379033467422386483),
    (3.0, 0.99865010196836990547),
    (3.5, 0.99976737092096447496),
    (4.0, 0.99996832875816688008),
    (4.5, 0.99999660232687526994),
    (5.0, 0.99999971334842812081),
    (5.5, 0.99999998101043753411),
    (6.0, 0.99999999901341235496),
    (6.5, 0.99999999995983999416),
    (7.0, 0.99999999999872018746),
    (7.5, 0.99999999999996809108),
    (8.0, 0.9999999999999993779),
];

#[test]
fn normal_cdf_matches_table() {
    for (x, want) in CDF_TABLE {
        let got = normal_cdf(x);
        assert!((got - want).abs() <= 2e-16 + 1e-14 * want, "x={x} got={got:e}");
    }
}

#[test]
fn normal_cdf_lower_tail_relative_precision() {
    // mpmath ncdf at 30 digits
    let table = [
        (-3.5, 2.32629079035525036349925886728e-4),
        (-4.7, 1.30080745391728092809370473472e-6),
        (-6.0, 9.86587645037698140700864132398e-10),
        (-10.0, 7.6198530241605260659733432516e-24),
    ];
    for (x, want) in table {
        let got = normal_cdf(x);
        assert!(((got - want) / want).abs() < 1e-13, "x={x} got={got:e}");
    }
}

#[test]
fn chi2_survival_table() {
    for (x, k, want) in CHI2_TABLE {
        assert_abs_diff_eq!(chi2_survival(x, k), want, epsilon = 1e-10);
    }
}

#[test]
fn chi2_survival_closed_forms() {
    // Even dof: Q = e^{-x/2} Σ_{i<k/2} (x/2)^i / i!. Odd dof via erfc.
    for step in 0..200 {
        let x = step as f64 * 0.25;
        let h = x / 2.0;
        for k in [2usize, 4, 6] {
            let mut term = 1.0;
            let mut sum = 1.0;
            for i in 1..k / 2 {
                term *= h / i as f64;
                sum += term;
            }
            assert_abs_diff_eq!(chi2_survival(x, k), (-h).exp() * sum, epsilon = 1e-10);
        }
        let s = x.sqrt();
        let q1 = erfc(s / std::f64::consts::SQRT_2);
        assert_abs_diff_eq!(chi2_survival(x, 1), q1, epsilon = 1e-10);
        let q3 = q1 + (2.0 / std::f64::consts::PI).sqrt() * s * (-h).exp();
        assert_abs_diff_eq!(chi2_survival(x, 3), q3, epsilon = 1e-10);
    }
}

#[test]
fn chi2_survival_monotone() {
    for k in 1..=6 {
        let mut prev = 1.0;
        for i in 0..400 {
            let v = chi2_survival(i as f64 * 0.1, k);
            assert!(v <= prev);
            prev = v;
        }
    }
}

/// Adaptive Simpson on [a, b].
fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

#[test]
fn null_means_by_quadrature() {
    for s in ScoreFunction::ALL {
        // u = Φ(z) maps the endpoint singularities of Φ⁻¹ to Gaussian tails.
        let integrand = |z: f64| {
            let u = 0.5 * erfc(-z / std::f64::consts::SQRT_2);
            if u <= 0.0 || u >= 1.0 {
                return 0.0;
            }
            s.j(u).unwrap() * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
        };
        let got = adaptive_simpson(&integrand, -8.0, 8.0, 1e-10);
        assert_abs_diff_eq!(got, s.null_mean(), epsilon = 1e-6);
    }
}

#[test]
fn finite_null_means_converge() {
    for s in ScoreFunction::ALL {
        let gap_small = (s.finite_null_mean(100) - s.null_mean()).abs();
        let gap_large = (s.finite_null_mean(10_000) - s.null_mean()).abs();
        assert!(gap_large <= gap_small + 1e-15, "{s}");
    }
    assert_abs_diff_eq!(ScoreFunction::Wilcoxon.finite_null_mean(37), 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(ScoreFunction::VanDerWaerden.finite_null_mean(37), 0.0, epsilon = 1e-14);
}

#[test]
fn growth_envelope_holds_near_endpoints() {
    for s in ScoreFunction::ALL {
        let mut worst = 0.0f64;
        for e in 1..=120 {
            let u = 10f64.powf(-(e as f64) / 10.0);
            worst = worst.max(s.envelope_ratio(u, 0.1).unwrap()).max(s.envelope_ratio(1.0 - u, 0.1).unwrap());
        }
        assert!(worst < 10.0, "{s}: envelope ratio {worst}");
    }
}
