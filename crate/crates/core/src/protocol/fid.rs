use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::acquire::{build_series, population_from_signal};
use super::{Scene, ShotSeries};
use crate::error::{invalid, Error, Result};
use crate::nvspin::{fid_envelope, fid_responsivity, fid_signal};

use std::f64::consts::PI;

pub const STREAM_FID: u64 = 0xF1D0_0000;
pub const STREAM_TRACKER: u64 = 0x7EAC_0000;

/// Working point of a Ramsey measurement at the scene's base temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkingPoint {
    pub temperature_k: f64,
    pub resonance_mhz: f64,
    pub drive_mhz: f64,
    pub delta_f_mhz: f64,
    pub tau_us: f64,
    pub s0: f64,
    /// ∂S/∂δf at the working point (1/MHz).
    pub responsivity: f64,
    /// Signed df₋/dT (MHz/K).
    pub dfdt_mhz_per_k: f64,
}

impl WorkingPoint {
    pub fn new(scene: &Scene, delta_f_mhz: f64, tau_us: f64) -> Result<Self> {
        let t = scene.environment.base_k;
        let t_local = t + mean_evolution_excess(scene, tau_us)?;
        let resonance = scene.sensor.f_minus(t_local)?;
        let nv = &scene.sensor.nv;
        Ok(Self {
            temperature_k: t,
            resonance_mhz: resonance,
            drive_mhz: resonance + delta_f_mhz,
            delta_f_mhz,
            tau_us,
            s0: fid_signal(tau_us, delta_f_mhz, nv),
            responsivity: fid_responsivity(tau_us, delta_f_mhz, nv),
            dfdt_mhz_per_k: scene.sensor.susceptibility_dfdt(t_local)?,
        })
    }
}

/// Mean laser excess seen while the spin precesses for `tau_us` after `t_w`.
fn mean_evolution_excess(scene: &Scene, tau_us: f64) -> Result<f64> {
    scene.mean_laser_excess(scene.sequence.t_w_ns * 1e-9, tau_us * 1e-6)
}

fn ramsey_signal(scene: &Scene, drive: f64, t_env: f64, tau_us: f64) -> Result<f64> {
    let t_local = t_env + mean_evolution_excess(scene, tau_us)?;
    let delta = drive - scene.sensor.f_minus(t_local)?;
    Ok(fid_signal(tau_us, delta, &scene.sensor.nv))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidScan {
    pub series: ShotSeries,
    pub drive_mhz: f64,
    /// Idle time appended to each repetition so that t_r stays fixed.
    pub padding_ns: Vec<f64>,
    pub laser_on_ns: Vec<f64>,
    pub t_r_ns: f64,
}

/// Ramsey fringes versus free-evolution time at fixed repetition interval.
pub fn run_fid_scan(
    scene: &Scene,
    tau_us: &[f64],
    delta_f_mhz: f64,
    shots_per_point: u64,
    stream: u64,
) -> Result<FidScan> {
    if tau_us.is_empty() {
        return Err(invalid("tau_list", "needs at least one evolution time"));
    }
    if shots_per_point == 0 {
        return Err(invalid("shots", "must be >= 1"));
    }
    let wp = WorkingPoint::new(scene, delta_f_mhz, 0.0)?;
    let mut padding = Vec::with_capacity(tau_us.len());
    let mut laser_on = Vec::with_capacity(tau_us.len());
    for &tau in tau_us {
        if !(tau >= 0.0) {
            return Err(invalid("tau_list", "evolution times must be >= 0"));
        }
        let seq = scene.sequence.ramsey(wp.drive_mhz, tau * 1e3)?;
        padding.push(seq.padding_ns());
        laser_on.push(seq.laser_on_ns());
    }
    let t_env = scene.environment.base_k;
    let c = scene.sensor.nv.contrast;
    let p0: Vec<f64> = tau_us
        .iter()
        .map(|&tau| Ok(population_from_signal(ramsey_signal(scene, wp.drive_mhz, t_env, tau)?, c)))
        .collect::<Result<_>>()?;
    let series = build_series(
        scene,
        "fid",
        STREAM_FID.wrapping_add(stream),
        "tau_us",
        tau_us.to_vec(),
        &p0,
        vec![shots_per_point; tau_us.len()],
    )?;
    Ok(FidScan {
        series,
        drive_mhz: wp.drive_mhz,
        padding_ns: padding,
        laser_on_ns: laser_on,
        t_r_ns: scene.sequence.t_r_ns,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inversion {
    /// δf = δf₀ + (S − S₀)/R with R the working-point responsivity.
    #[default]
    FirstOrder,
    /// Exact inversion of the cosine on the fringe branch holding the working point.
    FidBranch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerOptions {
    pub duration_s: f64,
    pub sample_time_s: f64,
    pub tau_us: f64,
    pub delta_f_mhz: f64,
    pub inversion: Inversion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerRun {
    /// Per sample; `temperature_k` holds the estimates.
    pub series: ShotSeries,
    pub true_temperature_k: Vec<f64>,
    pub working_point: WorkingPoint,
    pub shots_per_sample: u64,
}

impl TrackerRun {
    pub fn estimates(&self) -> &[f64] {
        self.series.temperature_k.as_deref().unwrap_or(&[])
    }
}

/// Fraction of the largest |∂S/∂δf| available at τ below which tracking is refused.
pub const RESPONSIVITY_FLOOR: f64 = 0.1;

pub fn invert_signal(s: f64, wp: &WorkingPoint, scene: &Scene, inversion: Inversion) -> f64 {
    let nv = &scene.sensor.nv;
    let delta = match inversion {
        Inversion::FirstOrder => wp.delta_f_mhz + (s - wp.s0) / wp.responsivity,
        Inversion::FidBranch => {
            let half = 0.5 * nv.contrast * fid_envelope(wp.tau_us, nv);
            let x = ((s - 1.0 + 0.5 * nv.contrast) / half).clamp(-1.0, 1.0);
            let a = x.acos();
            let phi0 = 2.0 * PI * wp.delta_f_mhz * wp.tau_us;
            let k = (phi0 / PI).floor();
            let phi = if (k as i64).rem_euclid(2) == 0 {
                k * PI + a
            } else {
                (k + 1.0) * PI - a
            };
            phi / (2.0 * PI * wp.tau_us)
        }
    };
    let resonance = wp.drive_mhz - delta;
    wp.temperature_k + (resonance - wp.resonance_mhz) / wp.dfdt_mhz_per_k
}

/// Fixed-τ Ramsey tracking of the environment schedule.
pub fn run_realtime_tracker(scene: &Scene, opts: &TrackerOptions) -> Result<TrackerRun> {
    if !(opts.sample_time_s > 0.0) || !(opts.duration_s >= opts.sample_time_s) {
        return Err(invalid("sample_time", "need 0 < sample_time <= duration"));
    }
    if !(opts.tau_us > 0.0) {
        return Err(invalid("tau_us", "must be > 0"));
    }
    scene.sequence.ramsey(0.0, opts.tau_us * 1e3)?;
    let wp = WorkingPoint::new(scene, opts.delta_f_mhz, opts.tau_us)?;
    let nv = &scene.sensor.nv;
    let ceiling = 0.5 * nv.contrast * 2.0 * PI * opts.tau_us * fid_envelope(opts.tau_us, nv);
    let threshold = RESPONSIVITY_FLOOR * ceiling;
    if !(wp.responsivity.abs() >= threshold) {
        return Err(Error::WeakResponsivity {
            value: wp.responsivity.abs(),
            threshold,
        });
    }
    let shots = scene.sequence.repetitions_in(opts.sample_time_s);
    if shots == 0 {
        return Err(invalid("sample_time", "shorter than one repetition"));
    }
    let n = (opts.duration_s / opts.sample_time_s + 1e-9).floor() as usize;
    let truth: Vec<f64> = (0..n)
        .map(|k| scene.environment.at((k as f64 + 0.5) * opts.sample_time_s))
        .collect();
    let c = nv.contrast;
    let p0: Vec<f64> = truth
        .par_iter()
        .map(|&t| Ok(population_from_signal(ramsey_signal(scene, wp.drive_mhz, t, opts.tau_us)?, c)))
        .collect::<Result<_>>()?;
    let times: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * opts.sample_time_s).collect();
    let mut series = build_series(
        scene,
        "realtime_fid",
        STREAM_TRACKER,
        "t_s",
        times,
        &p0,
        vec![shots; n],
    )?;
    series.timestamps = (1..=n).map(|k| k as f64 * opts.sample_time_s).collect();
    let estimates = series
        .signal
        .iter()
        .map(|&s| invert_signal(s, &wp, scene, opts.inversion))
        .collect();
    series.temperature_k = Some(estimates);
    Ok(TrackerRun {
        series,
        true_temperature_k: truth,
        working_point: wp,
        shots_per_sample: shots,
    })
}
