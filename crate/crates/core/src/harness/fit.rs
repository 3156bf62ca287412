use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Least-squares line through `(log t, log value)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute log-residual.
    pub residual: f64,
    pub sample_count: usize,
}

impl FitResult {
    /// Fitted constant `exp(intercept)`.
    pub fn constant(&self) -> f64 {
        self.intercept.exp()
    }
}

/// Fits `value ≈ C t^slope`; needs at least four samples, all positive.
pub fn fit_decay_exponent(samples: &[(f64, f64)]) -> Result<FitResult> {
    if samples.len() < 4 {
        return Err(Error::Data(format!("slope fit needs >= 4 samples, got {}", samples.len())));
    }
    for &(t, v) in samples {
        if !(t > 0.0) || !(v > 0.0) || !v.is_finite() {
            return Err(Error::Data(format!("slope fit needs positive samples, got ({t}, {v})")));
        }
    }
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Data("slope fit needs at least two distinct times".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(FitResult {
        slope,
        intercept,
        residual,
        sample_count: samples.len(),
    })
}

/// `n >= 2` log-spaced times in `[lo, hi]`.
pub fn log_times(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_laws() {
        let s: Vec<(f64, f64)> = log_times(0.01, 10.0, 7).iter().map(|&t| (t, 3.0 * t.powf(-0.5))).collect();
        let f = fit_decay_exponent(&s).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12 && f.residual < 1e-12);
        assert!((f.constant() - 3.0).abs() < 1e-12);
        let c: Vec<(f64, f64)> = log_times(0.01, 10.0, 5).iter().map(|&t| (t, 2.0)).collect();
        assert!(fit_decay_exponent(&c).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn perturbed_power_law() {
        let s: Vec<(f64, f64)> = log_times(1e-3, 1e3, 25)
            .iter()
            .map(|&t| (t, (1.0 + 0.01 * t.ln().sin()) / t))
            .collect();
        assert!((fit_decay_exponent(&s).unwrap().slope + 1.0).abs() < 0.02);
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(matches!(fit_decay_exponent(&[(1.0, 1.0); 3]), Err(Error::Data(_))));
        let bad = [(0.1, 1.0), (0.2, 0.0), (0.3, 1.0), (0.4, 1.0)];
        assert!(matches!(fit_decay_exponent(&bad), Err(Error::Data(_))));
    }

    proptest! {
        #[test]
        fn recovers_synthetic_exponents(e in -3.0..3.0_f64, c in 0.01..100.0_f64, lo in 1e-4..1.0_f64) {
            let s: Vec<(f64, f64)> = log_times(lo, lo * 1e3, 6).iter().map(|&t| (t, c * t.powf(e))).collect();
            let f = fit_decay_exponent(&s).unwrap();
            prop_assert!((f.slope - e).abs() < 1e-6);
            prop_assert!((f.constant() / c - 1.0).abs() < 1e-6);
        }
    }
}
