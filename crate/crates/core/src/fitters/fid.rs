use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmOptions};
use super::{names, FitResult};
use crate::error::{Error, Result};
use crate::nvspin::{fid_signal, NvParams};
use crate::stats::{mean, median};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FidFitOptions {
    /// Hold the decay exponent at this value instead of fitting it.
    pub fixed_nu: Option<f64>,
}

fn model(t: f64, c: f64, df: f64, t2: f64, nu: f64) -> f64 {
    let nv = NvParams {
        contrast: c,
        t2_star: t2.abs(),
        nu,
        ..NvParams::default()
    };
    fid_signal(t, df, &nv)
}

/// Peak of the discrete power spectrum of (S − mean), with parabolic refinement.
fn dominant_frequency(t: &[f64], s: &[f64]) -> (f64, f64) {
    let m = mean(s);
    let span = t[t.len() - 1] - t[0];
    let dts: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let nyquist = 0.5 / median(&dts);
    let resolution = 1.0 / (8.0 * span);
    let n = (nyquist / resolution).floor() as usize;
    let power = |f: f64| -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (&ti, &si) in t.iter().zip(s) {
            let ph = 2.0 * std::f64::consts::PI * f * ti;
            re += (si - m) * ph.cos();
            im += (si - m) * ph.sin();
        }
        re * re + im * im
    };
    let spectrum: Vec<f64> = (0..=n).map(|k| power(k as f64 * resolution)).collect();
    let k = spectrum
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
        .0;
    let mut f = k as f64 * resolution;
    if k > 0 && k < n {
        let (a, b, c) = (spectrum[k - 1], spectrum[k], spectrum[k + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            f += 0.5 * (a - c) / denom * resolution;
        }
    }
    (f, 1.0 / span)
}

/// Fit of S(t) = 1 − C/2 + (C/2)·cos(2π δf t)·exp[−(t/T2*)^ν], t in µs.
pub fn fit_fid(t_us: &[f64], s: &[f64], opts: &FidFitOptions) -> Result<FitResult> {
    if t_us.len() != s.len() || t_us.len() < 6 {
        return Err(Error::InsufficientData("FID fit needs at least 6 paired samples".into()));
    }
    if t_us.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InsufficientData("FID times must be strictly increasing".into()));
    }
    let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
    let c0 = (hi - lo).clamp(1e-3, 0.999);
    let (df0, resolution) = dominant_frequency(t_us, s);

    let mid = 1.0 - 0.5 * c0;
    let env: Vec<f64> = s.iter().map(|v| (v - mid).abs() / (0.5 * c0)).collect();
    let mut suffix = env.clone();
    for i in (0..suffix.len().saturating_sub(1)).rev() {
        suffix[i] = suffix[i].max(suffix[i + 1]);
    }
    let half_at = suffix
        .iter()
        .position(|&e| e < 0.5 * suffix[0])
        .map(|i| t_us[i])
        .unwrap_or(t_us[t_us.len() - 1]);
    let t2_0 = (half_at / std::f64::consts::LN_2.sqrt()).max(1e-3);

    let nu_fixed = opts.fixed_nu;
    let mut p0 = vec![c0, df0.max(1e-6), t2_0];
    if nu_fixed.is_none() {
        p0.push(2.0);
    }
    let residuals = |p: &[f64], r: &mut [f64]| {
        let nu = nu_fixed.unwrap_or_else(|| p[3]);
        for i in 0..t_us.len() {
            r[i] = model(t_us[i], p[0], p[1], p[2], nu) - s[i];
        }
    };
    let out = levenberg_marquardt(residuals, t_us.len(), &p0, &LmOptions::default());
    let mut out = out;
    out.params[1] = out.params[1].abs();
    out.params[2] = out.params[2].abs();
    let mut result = match nu_fixed {
        Some(nu) => {
            let mut r = FitResult::from_outcome(&names(&["C", "delta_f", "t2_star"]), &out);
            r.params.push(super::FitParam {
                name: "nu".into(),
                value: nu,
                stderr: 0.0,
            });
            r
        }
        None => FitResult::from_outcome(&names(&["C", "delta_f", "t2_star", "nu"]), &out),
    };
    if df0 < resolution {
        result.flag("delta_f_unresolved");
    }
    let span = t_us[t_us.len() - 1] - t_us[0];
    if span * out.params[1] < 2.0 {
        result.flag("fewer_than_two_periods");
    }
    Ok(result)
}
