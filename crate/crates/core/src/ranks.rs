//! Score-generating functions, empirical distribution functions and the
//! linear rank statistics T̂_j.
//!
//! T̂_j is computed two ways: from pooled ranks, (1/n_j) Σ J(i/(N+1)) over
//! the ranks i held by group j, and as the integral ∫ J((N/(N+1)) Ĥ) dF̂_j
//! with Ĥ = Σ λ_j F̂_j built from the per-group EDFs.

use crate::error::{GarchError, Result};
use crate::special::{inverse_normal, normal_pdf};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreFunction {
    /// J(u) = u
    Wilcoxon,
    /// J(u) = Φ⁻¹(u)
    #[serde(rename = "vdw")]
    VanDerWaerden,
    /// J(u) = (u − ½)²
    Mood,
    /// J(u) = Φ⁻¹(u)²
    Klotz,
}

impl ScoreFunction {
    pub const ALL: [ScoreFunction; 4] =
        [Self::Wilcoxon, Self::VanDerWaerden, Self::Mood, Self::Klotz];

    pub fn name(self) -> &'static str {
        match self {
            Self::Wilcoxon => "wilcoxon",
            Self::VanDerWaerden => "vdw",
            Self::Mood => "mood",
            Self::Klotz => "klotz",
        }
    }

    /// (J(u), J′(u)) for u strictly inside (0, 1).
    pub fn eval(self, u: f64) -> Result<(f64, f64)> {
        if !(u > 0.0 && u < 1.0) {
            return Err(GarchError::Domain(u));
        }
        Ok(match self {
            Self::Wilcoxon => (u, 1.0),
            Self::Mood => ((u - 0.5).powi(2), 2.0 * (u - 0.5)),
            Self::VanDerWaerden => {
                let z = inverse_normal(u)?;
                (z, 1.0 / normal_pdf(z))
            }
            Self::Klotz => {
                let z = inverse_normal(u)?;
                (z * z, 2.0 * z / normal_pdf(z))
            }
        })
    }

    pub fn j(self, u: f64) -> Result<f64> {
        self.eval(u).map(|v| v.0)
    }

    pub fn j_prime(self, u: f64) -> Result<f64> {
        self.eval(u).map(|v| v.1)
    }

    /// ∫₀¹ J(u) du, the common mean of every T̂_j under equal distributions.
    pub fn null_mean(self) -> f64 {
        match self {
            Self::Wilcoxon => 0.5,
            Self::VanDerWaerden => 0.0,
            Self::Mood => 1.0 / 12.0,
            Self::Klotz => 1.0,
        }
    }

    /// (1/N) Σ_{i=1}^N J(i/(N+1)): the exact value of Σ_j λ_j T̂_j, which is
    /// also E T̂_j under equal distributions with continuous data.
    pub fn finite_null_mean(self, total: usize) -> f64 {
        if total == 0 {
            return self.null_mean();
        }
        let denom = (total + 1) as f64;
        let sum: f64 = (1..=total)
            .map(|i| self.j(i as f64 / denom).expect("rank argument lies in (0,1)"))
            .sum();
        sum / total as f64
    }

    /// max(|J(u)|·[u(1−u)]^{1/2−δ}, |J′(u)|·[u(1−u)]^{3/2−δ}); bounded on
    /// (0,1) exactly when the growth envelope holds with constant K.
    pub fn envelope_ratio(self, u: f64, delta: f64) -> Result<f64> {
        let (j, jp) = self.eval(u)?;
        let w = u * (1.0 - u);
        Ok((j.abs() * w.powf(0.5 - delta)).max(jp.abs() * w.powf(1.5 - delta)))
    }
}

impl fmt::Display for ScoreFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreFunction {
    type Err = GarchError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wilcoxon" | "w" => Ok(Self::Wilcoxon),
            "vdw" | "vanderwaerden" | "van-der-waerden" => Ok(Self::VanDerWaerden),
            "mood" => Ok(Self::Mood),
            "klotz" => Ok(Self::Klotz),
            other => Err(GarchError::InvalidInput(format!("unknown score function '{other}'"))),
        }
    }
}

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(GarchError::EmptySeries);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GarchError::NonFinite(i));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// #{x_i ≤ x}.
    pub fn count_le(&self, x: f64) -> usize {
        self.sorted.partition_point(|&v| v <= x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.count_le(x) as f64 / self.sorted.len() as f64
    }
}

/// k residual samples pooled for ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledSample {
    values: Vec<f64>,
    labels: Vec<usize>,
    times: Vec<usize>,
    sizes: Vec<usize>,
    lambda: Vec<f64>,
}

impl PooledSample {
    pub fn new(groups: &[Vec<f64>]) -> Result<Self> {
        Self::with_lambda_floor(groups, 0.0)
    }

    /// Pools the groups and requires every λ_j = n_j/N to be at least
    /// `lambda_floor` (which must not exceed 1/k).
    pub fn with_lambda_floor(groups: &[Vec<f64>], lambda_floor: f64) -> Result<Self> {
        if groups.is_empty() {
            return Err(GarchError::InvalidInput("no samples to pool".into()));
        }
        let k = groups.len();
        if !(0.0..=1.0 / k as f64).contains(&lambda_floor) {
            return Err(GarchError::InvalidInput(format!(
                "lambda floor {lambda_floor} outside [0, 1/{k}]"
            )));
        }
        let mut values = Vec::new();
        let mut labels = Vec::new();
        let mut times = Vec::new();
        for (j, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(GarchError::InvalidInput(format!("sample {j} is empty")));
            }
            for (t, &v) in g.iter().enumerate() {
                if !v.is_finite() {
                    return Err(GarchError::NonFinite(values.len()));
                }
                values.push(v);
                labels.push(j);
                times.push(t);
            }
        }
        let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
        let total = values.len() as f64;
        let lambda: Vec<f64> = sizes.iter().map(|&n| n as f64 / total).collect();
        if let Some((j, l)) = lambda.iter().enumerate().find(|(_, &l)| l < lambda_floor) {
            return Err(GarchError::InvalidInput(format!(
                "sample {j} has weight {l:.4} below the floor {lambda_floor}"
            )));
        }
        Ok(Self { values, labels, times, sizes, lambda })
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn total(&self) -> usize {
        self.values.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn group(&self, j: usize) -> &[f64] {
        let start: usize = self.sizes[..j].iter().sum();
        &self.values[start..start + self.sizes[j]]
    }

    fn cmp_entries(&self, a: usize, b: usize) -> Ordering {
        self.values[a]
            .total_cmp(&self.values[b])
            .then(self.labels[a].cmp(&self.labels[b]))
            .then(self.times[a].cmp(&self.times[b]))
    }

    /// Pooled indices in rank order; ties broken by (value, sample, time).
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.cmp_entries(a, b));
        idx
    }

    /// 1-based pooled rank of each entry, in pooled (concatenated) order.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.values.len()];
        for (r, i) in self.order().into_iter().enumerate() {
            ranks[i] = r + 1;
        }
        ranks
    }

    /// Ĥ_N as the plain EDF of the concatenated values.
    pub fn pooled_edf(&self) -> Ecdf {
        Ecdf::new(&self.values).expect("pooled values validated on construction")
    }

    /// Ĥ_N(x) = Σ_j λ_j F̂_j(x) evaluated through the per-group EDFs.
    pub fn weighted_edf(&self, edfs: &[Ecdf], x: f64) -> f64 {
        edfs.iter().zip(&self.lambda).map(|(f, l)| l * f.eval(x)).sum()
    }

    pub fn group_edfs(&self) -> Vec<Ecdf> {
        (0..self.k())
            .map(|j| Ecdf::new(self.group(j)).expect("groups validated on construction"))
            .collect()
    }
}

/// T̂_j = (1/n_j) Σ_{rank i in group j} J(i/(N+1)).
pub fn linear_statistics(pooled: &PooledSample, score: ScoreFunction) -> Result<Vec<f64>> {
    let denom = (pooled.total() + 1) as f64;
    let mut sums = vec![0.0; pooled.k()];
    for (r, i) in pooled.order().into_iter().enumerate() {
        sums[pooled.labels[i]] += score.j((r + 1) as f64 / denom)?;
    }
    Ok(sums.iter().zip(&pooled.sizes).map(|(s, &n)| s / n as f64).collect())
}

/// T̂_j = ∫ J((N/(N+1)) Ĥ_N) dF̂_j with Ĥ_N = Σ λ_j F̂_j.
pub fn linear_statistics_integral(pooled: &PooledSample, score: ScoreFunction) -> Result<Vec<f64>> {
    let edfs = pooled.group_edfs();
    let total = pooled.total() as f64;
    let shrink = total / (total + 1.0);
    (0..pooled.k())
        .map(|j| {
            let g = pooled.group(j);
            let mut acc = 0.0;
            for &x in g {
                acc += score.j(shrink * pooled.weighted_edf(&edfs, x))?;
            }
            Ok(acc / g.len() as f64)
        })
        .collect()
}

/// Ĥ_N(x) mapped to (N/(N+1))Ĥ_N(x) + 1/(2(N+1)), the argument at which J′
/// is evaluated by the dispersion estimator; always inside (0,1).
pub fn clipped_pooled_cdf(h: f64, total: usize) -> f64 {
    let n = total as f64;
    (n / (n + 1.0)) * h + 0.5 / (n + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ecdf_examples() {
        let f = Ecdf::new(&[1.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(f.eval(2.0), 2.0 / 3.0);
        assert_abs_diff_eq!(f.eval(1.5), 1.0 / 3.0);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(f64::INFINITY), 1.0);
        let d = Ecdf::new(&[1.0, 1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(d.eval(1.0), 2.0 / 3.0);
        assert!(Ecdf::new(&[]).is_err());
    }

    #[test]
    fn pooled_edf_two_points() {
        let p = PooledSample::new(&[vec![1.0], vec![2.0]]).unwrap();
        assert_abs_diff_eq!(p.pooled_edf().eval(1.5), 0.5);
    }

    #[test]
    fn hand_ranked_wilcoxon() {
        let p = PooledSample::new(&[vec![1.0, 3.0], vec![2.0, 4.0]]).unwrap();
        let t = linear_statistics(&p, ScoreFunction::Wilcoxon).unwrap();
        assert_abs_diff_eq!(t[0], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(t[1], 0.6, epsilon = 1e-15);
    }

    #[test]
    fn single_group_gives_finite_mean() {
        let p = PooledSample::new(&[vec![5.0, -1.0, 2.0, 0.5]]).unwrap();
        for s in ScoreFunction::ALL {
            let t = linear_statistics(&p, s).unwrap();
            assert_abs_diff_eq!(t[0], s.finite_null_mean(4), epsilon = 1e-15);
        }
    }

    #[test]
    fn ties_broken_by_group_then_time() {
        let p = PooledSample::new(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        // order: (0,g0,t1) (0,g1,t0) (1,g0,t0) (1,g1,t1)
        assert_eq!(p.ranks(), vec![3, 1, 2, 4]);
    }

    #[test]
    fn score_values() {
        assert_eq!(ScoreFunction::Wilcoxon.eval(0.3).unwrap(), (0.3, 1.0));
        assert_abs_diff_eq!(ScoreFunction::VanDerWaerden.j(0.5).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            ScoreFunction::VanDerWaerden.j(0.975).unwrap(),
            1.959963984540054,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(ScoreFunction::Mood.j(0.5).unwrap(), 0.0);
        assert!(matches!(ScoreFunction::Klotz.eval(1.0), Err(GarchError::Domain(_))));
        assert!(ScoreFunction::Mood.eval(0.0).is_err());
    }

    #[test]
    fn lambda_floor_enforced() {
        let g = vec![vec![0.0; 2], vec![1.0; 18]];
        assert!(PooledSample::with_lambda_floor(&g, 0.2).is_err());
        assert!(PooledSample::with_lambda_floor(&g, 0.1).is_ok());
        assert!(PooledSample::with_lambda_floor(&g, 0.6).is_err());
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ScoreFunction::ALL {
            assert_eq!(s.name().parse::<ScoreFunction>().unwrap(), s);
        }
        assert!("median".parse::<ScoreFunction>().is_err());
    }

    #[test]
    fn clipped_argument_at_ranks() {
        let n = 9;
        for i in 0..=n {
            let got = clipped_pooled_cdf(i as f64 / n as f64, n);
            assert_abs_diff_eq!(got, (2 * i + 1) as f64 / (2 * (n + 1)) as f64, epsilon = 1e-15);
        }
    }
}
