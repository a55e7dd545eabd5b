use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stats::{linear_regression, mean, std_dev};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationAnalysis {
    /// Windows actually used (whole multiples of the sample time), s.
    pub windows_s: Vec<f64>,
    /// σ of block means, same unit as the series.
    pub sigma: Vec<f64>,
    /// log-log slope; `None` when some σ vanishes.
    pub slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    /// Mean of σ·√w.
    pub eta: f64,
}

/// Block-averaged standard deviation of an evenly sampled series versus window length.
pub fn stddev_vs_integration(series: &[f64], sample_time: f64, windows: &[f64]) -> Result<IntegrationAnalysis> {
    if !(sample_time > 0.0) {
        return Err(invalid("sample_time", "must be > 0"));
    }
    if windows.is_empty() {
        return Err(invalid("windows", "need at least one window"));
    }
    let mut used = Vec::with_capacity(windows.len());
    let mut sigma = Vec::with_capacity(windows.len());
    for &w in windows {
        let m = ((w / sample_time).round() as usize).max(1);
        if series.len() < 10 * m {
            return Err(Error::InsufficientData(format!(
                "window {w} s needs at least {} samples, got {}",
                10 * m,
                series.len()
            )));
        }
        let blocks: Vec<f64> = series.chunks_exact(m).map(mean).collect();
        used.push(m as f64 * sample_time);
        sigma.push(std_dev(&blocks));
    }
    let eta = mean(
        &used
            .iter()
            .zip(&sigma)
            .map(|(w, s)| s * w.sqrt())
            .collect::<Vec<_>>(),
    );
    let (slope, slope_stderr) = if used.len() >= 2 && sigma.iter().all(|&s| s > 0.0) {
        let lx: Vec<f64> = used.iter().map(|w| w.ln()).collect();
        let ly: Vec<f64> = sigma.iter().map(|s| s.ln()).collect();
        let line = linear_regression(&lx, &ly)?;
        (Some(line.slope), Some(line.slope_stderr))
    } else {
        (None, None)
    };
    Ok(IntegrationAnalysis {
        windows_s: used,
        sigma,
        slope,
        slope_stderr,
        eta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_zero_sigma() {
        let xs = vec![3.0; 1000];
        let r = stddev_vs_integration(&xs, 0.01, &[0.01, 0.1, 1.0]).unwrap();
        assert!(r.sigma.iter().all(|&s| s == 0.0));
        assert!(r.slope.is_none());
    }

    #[test]
    fn short_series_names_required_length() {
        let xs = vec![0.0; 50];
        match stddev_vs_integration(&xs, 0.01, &[0.1]) {
            Err(Error::InsufficientData(msg)) => assert!(msg.contains("100")),
            other => panic!("{other:?}"),
        }
    }
}
