use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmOptions};
use super::FitResult;
use crate::error::{invalid, Error, Result};
use crate::nvspin::lorentzian;
use crate::stats::{mad, median};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFitOptions {
    pub n_dips: usize,
    /// Model each dip as a symmetric doublet with this splitting (MHz).
    pub hyperfine_split: Option<f64>,
    /// Expected FWHM (MHz); sets smoothing, detection and the initial width.
    pub linewidth: f64,
}

fn moving_average(s: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let n = s.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            s[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

fn prominence(s: &[f64], i: usize) -> f64 {
    let v = s[i];
    let mut left = v;
    for j in (0..i).rev() {
        if s[j] < v {
            break;
        }
        left = left.max(s[j]);
    }
    let mut right = v;
    for &x in &s[i + 1..] {
        if x < v {
            break;
        }
        right = right.max(x);
    }
    left.min(right) - v
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    center: f64,
    prominence: f64,
    floor: f64,
}

fn detect(f: &[f64], s: &[f64], opts: &LorentzianFitOptions, step: f64) -> Vec<Candidate> {
    let width = ((0.5 * opts.linewidth / step).round() as usize).max(1);
    let smooth = moving_average(s, width | 1);
    let resid: Vec<f64> = s.iter().zip(&smooth).map(|(a, b)| a - b).collect();
    let noise = 1.4826 * mad(&resid);
    let span = smooth.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - smooth.iter().copied().fold(f64::INFINITY, f64::min);
    let threshold = (3.0 * noise).max(1e-9 * span);
    let n = s.len();
    let mut minima = Vec::new();
    for i in 0..n {
        let lower_left = i == 0 || smooth[i] < smooth[i - 1];
        let lower_right = i + 1 == n || smooth[i] <= smooth[i + 1];
        if !(lower_left && lower_right) || i == 0 || i + 1 == n {
            continue;
        }
        let p = prominence(&smooth, i);
        if p > threshold {
            let half = (opts.linewidth / step / 2.0).ceil() as usize;
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            let floor = s[lo..=hi].iter().copied().fold(f64::INFINITY, f64::min);
            minima.push(Candidate {
                center: f[i],
                prominence: p,
                floor,
            });
        }
    }
    let Some(split) = opts.hyperfine_split else {
        return minima;
    };
    // Pair hyperfine partners; an unpaired component is shifted toward the
    // side where the smoothed signal is lower.
    let tol = opts.linewidth.max(2.0 * step);
    let mut order: Vec<usize> = (0..minima.len()).collect();
    order.sort_by(|&a, &b| minima[b].prominence.total_cmp(&minima[a].prominence));
    let mut used = vec![false; minima.len()];
    let mut out = Vec::new();
    let value_at = |x: f64| -> f64 {
        let k = f.partition_point(|&v| v < x).min(n - 1);
        smooth[k]
    };
    for &i in &order {
        if used[i] {
            continue;
        }
        used[i] = true;
        let partner = (0..minima.len()).find(|&j| {
            !used[j] && ((minima[j].center - minima[i].center).abs() - split).abs() <= tol
        });
        match partner {
            Some(j) => {
                used[j] = true;
                out.push(Candidate {
                    center: 0.5 * (minima[i].center + minima[j].center),
                    prominence: minima[i].prominence + minima[j].prominence,
                    floor: minima[i].floor.min(minima[j].floor),
                });
            }
            None => {
                let c = minima[i].center;
                let shift = if value_at(c + split) < value_at(c - split) {
                    0.5 * split
                } else {
                    -0.5 * split
                };
                out.push(Candidate {
                    center: c + shift,
                    ..minima[i]
                });
            }
        }
    }
    out
}

fn dip_shape(x: f64, center: f64, fwhm: f64, split: Option<f64>) -> f64 {
    match split {
        Some(h) => 0.5 * (lorentzian(x, center - 0.5 * h, fwhm) + lorentzian(x, center + 0.5 * h, fwhm)),
        None => lorentzian(x, center, fwhm),
    }
}

fn check_inputs(f: &[f64], s: &[f64], opts: &LorentzianFitOptions) -> Result<f64> {
    if f.len() != s.len() || f.len() < 3 {
        return Err(Error::InsufficientData("spectrum needs matching f and S of length >= 3".into()));
    }
    if opts.n_dips == 0 {
        return Err(invalid("n_dips", "must be >= 1"));
    }
    if !(opts.linewidth > 0.0) {
        return Err(invalid("linewidth", "must be > 0"));
    }
    if f.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("f_grid", "must be strictly increasing"));
    }
    let steps: Vec<f64> = f.windows(2).map(|w| w[1] - w[0]).collect();
    let step = median(&steps);
    if step > opts.linewidth / 5.0 * (1.0 + 1e-9) {
        return Err(Error::InsufficientData(format!(
            "grid step {step} MHz gives fewer than 5 points per {} MHz linewidth",
            opts.linewidth
        )));
    }
    Ok(step)
}

/// Baseline plus `n_dips` Lorentzian dips, centers returned in ascending order.
pub fn fit_lorentzian_multi(f: &[f64], s: &[f64], opts: &LorentzianFitOptions) -> Result<FitResult> {
    let step = check_inputs(f, s, opts)?;
    let mut cands = detect(f, s, opts, step);
    if cands.len() < opts.n_dips {
        let mut detections: Vec<f64> = cands.iter().map(|c| c.center).collect();
        detections.sort_by(f64::total_cmp);
        return Err(Error::TooFewDips {
            expected: opts.n_dips,
            detections,
        });
    }
    cands.sort_by(|a, b| b.prominence.total_cmp(&a.prominence));
    cands.truncate(opts.n_dips);
    cands.sort_by(|a, b| a.center.total_cmp(&b.center));
    fit_from(f, s, opts, &cands)
}

fn fit_from(f: &[f64], s: &[f64], opts: &LorentzianFitOptions, cands: &[Candidate]) -> Result<FitResult> {
    let baseline = median(s);
    let depth_scale = if opts.hyperfine_split.is_some() { 2.0 } else { 1.0 };
    let mut p0 = vec![baseline];
    let mut fd_steps = vec![1e-7 * baseline.abs().max(1e-3)];
    for c in cands {
        let depth = ((baseline - c.floor) * depth_scale).max(1e-12);
        p0.extend([c.center, opts.linewidth, depth]);
        fd_steps.extend([1e-5 * opts.linewidth, 1e-5 * opts.linewidth, 1e-7 * depth.max(1e-3)]);
    }
    let split = opts.hyperfine_split;
    let n_dips = opts.n_dips;
    let residuals = |p: &[f64], r: &mut [f64]| {
        for (i, (&x, &y)) in f.iter().zip(s).enumerate() {
            let mut model = p[0];
            for k in 0..n_dips {
                let (c, w, d) = (p[1 + 3 * k], p[2 + 3 * k].abs(), p[3 + 3 * k]);
                model -= d * dip_shape(x, c, w, split);
            }
            r[i] = model - y;
        }
    };
    let lm_opts = LmOptions {
        steps: Some(fd_steps),
        ..LmOptions::default()
    };
    let out = levenberg_marquardt(residuals, f.len(), &p0, &lm_opts);

    let mut order: Vec<usize> = (0..n_dips).collect();
    order.sort_by(|&a, &b| out.params[1 + 3 * a].total_cmp(&out.params[1 + 3 * b]));
    let mut sorted = out.clone();
    sorted.params = vec![out.params[0]];
    sorted.stderr = vec![out.stderr[0]];
    let mut names = vec!["baseline".to_string()];
    for (rank, &k) in order.iter().enumerate() {
        sorted.params.extend([
            out.params[1 + 3 * k],
            out.params[2 + 3 * k].abs(),
            out.params[3 + 3 * k],
        ]);
        sorted.stderr.extend_from_slice(&out.stderr[1 + 3 * k..4 + 3 * k]);
        names.extend([
            format!("center_{rank}"),
            format!("fwhm_{rank}"),
            format!("depth_{rank}"),
        ]);
    }
    Ok(FitResult::from_outcome(&names, &sorted))
}

impl FitResult {
    /// Fitted dip centers in ascending order.
    pub fn centers(&self) -> Vec<f64> {
        self.params
            .iter()
            .filter(|p| p.name.starts_with("center_"))
            .map(|p| p.value)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nvspin::{odmr_spectrum, NvParams};

    fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|i| lo + step * i as f64).collect()
    }

    #[test]
    fn noiseless_double_dip() {
        let nv = NvParams {
            hyperfine_split: 0.0,
            ..NvParams::default()
        };
        let f = grid(2320.0, 3420.0, 0.1);
        let s = odmr_spectrum(&f, &[2332.4, 3407.6], &nv);
        let fit = fit_lorentzian_multi(
            &f,
            &s,
            &LorentzianFitOptions {
                n_dips: 2,
                hyperfine_split: None,
                linewidth: nv.linewidth,
            },
        )
        .unwrap();
        let c = fit.centers();
        assert!((c[0] - 2332.4).abs() < 1e-6 && (c[1] - 3407.6).abs() < 1e-6);
        assert!((fit.get("depth_0").unwrap() - 0.27).abs() < 1e-6);
    }

    #[test]
    fn noiseless_hyperfine_doublet() {
        let nv = NvParams::default();
        let f = grid(2860.0, 2880.0, 0.05);
        let s = odmr_spectrum(&f, &[2870.3], &nv);
        let fit = fit_lorentzian_multi(
            &f,
            &s,
            &LorentzianFitOptions {
                n_dips: 1,
                hyperfine_split: Some(nv.hyperfine_split),
                linewidth: nv.linewidth,
            },
        )
        .unwrap();
        assert!((fit.centers()[0] - 2870.3).abs() < 1e-6);
    }

    #[test]
    fn too_few_dips_lists_detections() {
        let nv = NvParams {
            hyperfine_split: 0.0,
            ..NvParams::default()
        };
        let f = grid(2860.0, 2880.0, 0.1);
        let s = odmr_spectrum(&f, &[2870.0], &nv);
        let err = fit_lorentzian_multi(
            &f,
            &s,
            &LorentzianFitOptions {
                n_dips: 2,
                hyperfine_split: None,
                linewidth: nv.linewidth,
            },
        )
        .unwrap_err();
        match err {
            Error::TooFewDips { expected, detections } => {
                assert_eq!(expected, 2);
                assert_eq!(detections.len(), 1);
                assert!((detections[0] - 2870.0).abs() < 0.11);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let f = grid(2860.0, 2880.0, 0.5);
        let s = vec![1.0; f.len()];
        let r = fit_lorentzian_multi(
            &f,
            &s,
            &LorentzianFitOptions {
                n_dips: 1,
                hyperfine_split: None,
                linewidth: 0.6,
            },
        );
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }
}
