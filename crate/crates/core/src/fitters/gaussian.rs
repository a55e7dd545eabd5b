use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmOptions};
use super::{names, FitResult};
use crate::error::Result;
use crate::stats::{histogram, mean, std_dev, Histogram};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub histogram: Histogram,
    pub amplitude: f64,
    pub mean: f64,
    pub sigma: f64,
    pub fit: FitResult,
}

/// Histogram of `xs` with a least-squares Gaussian profile fitted to the bin counts.
pub fn fit_gaussian_histogram(xs: &[f64], bins: usize) -> Result<GaussianFit> {
    let h = histogram(xs, bins)?;
    let centers = h.centers();
    let counts: Vec<f64> = h.counts.iter().map(|&c| c as f64).collect();
    let (m0, s0) = (mean(xs), std_dev(xs).max(h.bin_width()));
    let a0 = xs.len() as f64 * h.bin_width() / (s0 * (2.0 * std::f64::consts::PI).sqrt());
    let residuals = |p: &[f64], r: &mut [f64]| {
        for i in 0..centers.len() {
            let z = (centers[i] - p[1]) / p[2];
            r[i] = p[0] * (-0.5 * z * z).exp() - counts[i];
        }
    };
    let steps = vec![1e-6 * a0.max(1.0), 1e-6 * s0, 1e-6 * s0];
    let opts = LmOptions {
        steps: Some(steps),
        ..LmOptions::default()
    };
    let out = levenberg_marquardt(residuals, centers.len(), &[a0, m0, s0], &opts);
    let mut out = out;
    out.params[2] = out.params[2].abs();
    let fit = FitResult::from_outcome(&names(&["amplitude", "mean", "sigma"]), &out);
    Ok(GaussianFit {
        histogram: h,
        amplitude: out.params[0],
        mean: out.params[1],
        sigma: out.params[2],
        fit,
    })
}
