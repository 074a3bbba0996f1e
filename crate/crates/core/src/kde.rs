//! Gaussian kernel density estimation with Silverman's rule-of-thumb
//! bandwidth h = 0.9·min(sd, IQR/1.34)·n^{-1/5}.

use crate::error::{GarchError, Result};
use crate::special::normal_pdf;
use serde::{Deserialize, Serialize};

/// Kernel contributions beyond this many bandwidths are dropped
/// (φ(8.5) ≈ 2e-16 relative to φ(0)).
const WINDOW: f64 = 8.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    sample: Vec<f64>,
    bandwidth: f64,
}

/// Silverman bandwidth; falls back to the standard deviation when the IQR
/// collapses, and errors when both do.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(GarchError::InvalidInput("bandwidth needs at least 2 points".into()));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    if !(spread > 0.0) || !spread.is_finite() {
        return Err(GarchError::InvalidInput("sample has zero spread".into()));
    }
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

/// Linear-interpolation sample quantile (type 7).
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl DensityEstimate {
    pub fn new(values: &[f64]) -> Result<Self> {
        let h = silverman_bandwidth(values)?;
        Self::with_bandwidth(values, h)
    }

    pub fn with_bandwidth(values: &[f64], bandwidth: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(GarchError::EmptySeries);
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GarchError::NonFinite(i));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(GarchError::InvalidInput(format!("bandwidth must be positive, got {bandwidth}")));
        }
        let mut sample = values.to_vec();
        sample.sort_by(f64::total_cmp);
        Ok(Self { sample, bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn sample(&self) -> &[f64] {
        &self.sample
    }

    /// f̂(x) = (nh)⁻¹ Σ φ((x − x_i)/h).
    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let lo = self.sample.partition_point(|&v| v < x - WINDOW * h);
        let hi = self.sample.partition_point(|&v| v <= x + WINDOW * h);
        let sum: f64 = self.sample[lo..hi].iter().map(|&v| normal_pdf((x - v) / h)).sum();
        sum / (self.sample.len() as f64 * h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_point_unit_bandwidth() {
        let k = DensityEstimate::with_bandwidth(&[0.0], 1.0).unwrap();
        assert_abs_diff_eq!(k.density(0.0), 1.0 / (2.0 * std::f64::consts::PI).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn integrates_to_one() {
        let k = DensityEstimate::new(&[-1.0, 0.2, 0.3, 2.5, 4.0]).unwrap();
        let step = 1e-3;
        let total: f64 = (-20_000..20_000).map(|i| k.density(i as f64 * step) * step).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn bandwidth_hand_value() {
        // sd = √2.5, IQR = 2 (type 7) → min(1.5811, 1.4925) = 1.4925
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        let h = silverman_bandwidth(&v).unwrap();
        assert_abs_diff_eq!(h, 0.9 * (2.0 / 1.34) * 5f64.powf(-0.2), epsilon = 1e-14);
    }

    #[test]
    fn degenerate_sample_rejected() {
        assert!(silverman_bandwidth(&[1.0, 1.0, 1.0]).is_err());
        assert!(DensityEstimate::with_bandwidth(&[1.0], 0.0).is_err());
    }
}
