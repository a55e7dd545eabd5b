use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::acquire::{build_series, population_from_signal};
use super::{Scene, ShotSeries};
use crate::error::{invalid, Result};
use crate::fitters::{fit_lorentzian_multi, FitResult, LorentzianFitOptions};
use crate::nvspin::odmr_spectrum;
use crate::Vec3;

pub const STREAM_ODMR: u64 = 0x0D0D_0000;
pub const STREAM_COOLING: u64 = 0xC001_0000;

/// Normalized-signal model of a pulsed-ODMR sweep with an ideal π pulse.
pub fn odmr_model(scene: &Scene, f_list: &[f64], t_local: f64, extra_field: &Vec3) -> Result<Vec<f64>> {
    let tp = scene.sensor.transitions_with_extra_field(t_local, extra_field)?;
    Ok(odmr_spectrum(f_list, &[tp.f_minus, tp.f_plus], &scene.sensor.nv))
}

/// Pulsed-ODMR spectrum at environment temperature `t_env`.
///
/// The spin sees the laser-heating excess left at the sequence's `t_w`.
pub fn run_pulsed_odmr(
    scene: &Scene,
    f_list: &[f64],
    t_env: f64,
    shots_per_point: u64,
    stream: u64,
) -> Result<ShotSeries> {
    if f_list.is_empty() {
        return Err(invalid("f_list", "needs at least one frequency"));
    }
    if shots_per_point == 0 {
        return Err(invalid("shots", "must be >= 1"));
    }
    let t_local = t_env + scene.laser_excess(scene.sequence.t_w_ns * 1e-9)?;
    let model = odmr_model(scene, f_list, t_local, &Vec3::zeros())?;
    let c = scene.sensor.nv.contrast;
    let p0: Vec<f64> = model.iter().map(|&s| population_from_signal(s, c)).collect();
    build_series(
        scene,
        "pulsed_odmr",
        STREAM_ODMR.wrapping_add(stream),
        "f_MHz",
        f_list.to_vec(),
        &p0,
        vec![shots_per_point; f_list.len()],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub half_span_mhz: f64,
    pub step_mhz: f64,
    pub shots_per_point: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            half_span_mhz: 4.0,
            step_mhz: 0.1,
            shots_per_point: 1_000_000,
        }
    }
}

impl SweepOptions {
    pub fn grid(&self, center: f64) -> Vec<f64> {
        let n = (self.half_span_mhz / self.step_mhz).round() as i64;
        (-n..=n).map(|k| center + k as f64 * self.step_mhz).collect()
    }
}

/// One noisy sweep of the f₋ dip on `opts.grid(center)`.
fn simulate_sweep(
    scene: &Scene,
    t_local: f64,
    extra_field: &Vec3,
    center: f64,
    opts: &SweepOptions,
    seed: u64,
    index: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let f = opts.grid(center);
    let model = odmr_model(scene, &f, t_local, extra_field)?;
    let c = scene.sensor.nv.contrast;
    let window = scene.sequence.readout_window_ns;
    let mut rng = super::rng_for(seed, index);
    let mut signal = Vec::with_capacity(f.len());
    for &s in &model {
        let p0 = population_from_signal(s, c);
        let counts = super::simulate_shots(p0, opts.shots_per_point, window, &scene.readout, &mut rng)?;
        signal.push(scene.readout.normalize(counts, opts.shots_per_point, window));
    }
    Ok((f, signal))
}

/// Sweep around `guess`, fit the f₋ dip and return its center.
pub(crate) fn sweep_center(
    scene: &Scene,
    t_local: f64,
    extra_field: &Vec3,
    guess: f64,
    opts: &SweepOptions,
    seed: u64,
    index: u64,
) -> Result<(f64, FitResult)> {
    let (f, signal) = simulate_sweep(scene, t_local, extra_field, guess, opts, seed, index)?;
    let nv = &scene.sensor.nv;
    let fit = fit_lorentzian_multi(
        &f,
        &signal,
        &LorentzianFitOptions {
            n_dips: 1,
            hyperfine_split: (nv.hyperfine_split > 0.0).then_some(nv.hyperfine_split),
            linewidth: nv.linewidth,
        },
    )?;
    Ok((fit.centers()[0], fit))
}

/// Least-squares center of the known f₋ line shape within one linewidth of `guess`.
///
/// Contrast, linewidth and hyperfine splitting are taken from the scene, so
/// only the position is estimated. Used where each sweep has too few photons
/// for a free fit.
pub fn fixed_shape_center(scene: &Scene, f: &[f64], signal: &[f64], guess: f64) -> f64 {
    let nv = &scene.sensor.nv;
    let sse = |c: f64| -> f64 {
        odmr_spectrum(f, &[c], nv)
            .iter()
            .zip(signal)
            .map(|(m, y)| (m - y).powi(2))
            .sum()
    };
    let n = 100;
    let h = nv.linewidth / n as f64;
    let values: Vec<f64> = (-n..=n).map(|k| sse(guess + k as f64 * h)).collect();
    let k = (0..values.len()).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    let mut c = guess + (k as f64 - n as f64) * h;
    if k > 0 && k + 1 < values.len() {
        let (l, m, r) = (values[k - 1], values[k], values[k + 1]);
        let curv = l - 2.0 * m + r;
        if curv > 0.0 {
            c += 0.5 * h * (l - r) / curv;
        }
    }
    c
}

/// Noisy sweep around `guess` reduced with [`fixed_shape_center`].
pub(crate) fn track_center(
    scene: &Scene,
    t_local: f64,
    extra_field: &Vec3,
    guess: f64,
    opts: &SweepOptions,
    seed: u64,
    index: u64,
) -> Result<f64> {
    let (f, signal) = simulate_sweep(scene, t_local, extra_field, guess, opts, seed, index)?;
    Ok(fixed_shape_center(scene, &f, &signal, guess))
}

pub const COOLING_REFERENCE_NS: f64 = 10_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingScan {
    pub t_w_ns: Vec<f64>,
    pub center_mhz: Vec<f64>,
    /// Measured local excess relative to the 10 µs reference (K).
    pub delta_t_k: Vec<f64>,
    /// Excess the thermal model imposed, for comparison (K).
    pub true_excess_k: Vec<f64>,
    pub reference_center_mhz: f64,
    pub dfdt_mhz_per_k: f64,
    pub rng_seed: u64,
}

/// Laser-heating cooling curve from pulsed-ODMR dip positions versus `t_w`.
pub fn run_cooling_scan(scene: &Scene, t_w_ns: &[f64], sweep: &SweepOptions) -> Result<CoolingScan> {
    if t_w_ns.is_empty() {
        return Err(invalid("t_w_list", "needs at least one waiting time"));
    }
    for &t in t_w_ns.iter().chain(std::iter::once(&COOLING_REFERENCE_NS)) {
        scene.sequence.with_wait(t)?;
    }
    let t_env = scene.environment.base_k;
    let dfdt = scene.sensor.susceptibility_dfdt(t_env)?;
    let guess = scene.sensor.f_minus(t_env)?;
    let seed = super::stream_seed(scene.seed, STREAM_COOLING);
    let zero = Vec3::zeros();
    let measure = |t_w: f64, index: u64| -> Result<(f64, f64)> {
        let excess = scene.laser_excess(t_w * 1e-9)?;
        let (center, _) = sweep_center(scene, t_env + excess, &zero, guess, sweep, seed, index)?;
        Ok((center, excess))
    };
    let (reference, _) = measure(COOLING_REFERENCE_NS, u64::MAX)?;
    let results: Vec<(f64, f64)> = t_w_ns
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            if t == COOLING_REFERENCE_NS {
                Ok((reference, scene.laser_excess(t * 1e-9)?))
            } else {
                measure(t, i as u64)
            }
        })
        .collect::<Result<_>>()?;
    Ok(CoolingScan {
        t_w_ns: t_w_ns.to_vec(),
        center_mhz: results.iter().map(|r| r.0).collect(),
        delta_t_k: results.iter().map(|r| (r.0 - reference) / dfdt).collect(),
        true_excess_k: results.iter().map(|r| r.1).collect(),
        reference_center_mhz: reference,
        dfdt_mhz_per_k: dfdt,
        rng_seed: seed,
    })
}
