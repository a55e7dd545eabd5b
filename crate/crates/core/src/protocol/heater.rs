use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::odmr::{track_center, SweepOptions};
use super::Scene;
use crate::error::{invalid, Result};
use crate::fitters::fit_exponential;
use crate::stats::mean;
use crate::thermal::{stripline_response, Waveform};

pub const STREAM_HEATER: u64 = 0x4EA7_0000;

/// Chopped current through the stripline next to the sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeaterDrive {
    /// Current schedule (A); must repeat.
    pub current: Waveform,
    /// Current at which the stripline source reaches its amplitude (A).
    pub i0_a: f64,
    /// Field at the NV along its axis per ampere (G/A).
    pub field_per_ampere_g: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChoppedDcOptions {
    pub cycles: usize,
    pub warmup_cycles: usize,
    pub sample_time_s: f64,
    pub half_span_mhz: f64,
    pub step_mhz: f64,
}

impl Default for ChoppedDcOptions {
    fn default() -> Self {
        Self {
            cycles: 5,
            warmup_cycles: 3,
            sample_time_s: 0.1,
            half_span_mhz: 2.1,
            step_mhz: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeAnalysis {
    pub start_s: f64,
    pub current_a: f64,
    /// Mean raw frequency step across this edge (MHz).
    pub measured_jump_mhz: f64,
    /// Step the configured wire field produces at the working point (MHz).
    pub expected_jump_mhz: f64,
    /// Exponential fit A·exp(−t/τ) + c of the folded ΔT in this segment (K, s).
    pub amplitude_k: Option<f64>,
    pub tau_s: Option<f64>,
    pub offset_k: Option<f64>,
    /// Late-segment mean minus early-segment mean of the folded ΔT (K).
    pub drift_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoppedDcRun {
    pub time_s: Vec<f64>,
    pub current_a: Vec<f64>,
    pub b_wire_g: Vec<f64>,
    pub f_measured_mhz: Vec<f64>,
    /// Frequency trace with the wire-field step removed, converted to ΔT (K).
    pub delta_t_k: Vec<f64>,
    pub true_delta_t_k: Vec<f64>,
    pub folded_time_s: Vec<f64>,
    pub folded_delta_t_k: Vec<f64>,
    pub edges: Vec<EdgeAnalysis>,
    pub dfdt_mhz_per_k: f64,
    pub rng_seed: u64,
}

impl ChoppedDcRun {
    /// Mean |A| and τ over edges whose fit succeeded.
    pub fn step_response(&self) -> Option<(f64, f64)> {
        let fits: Vec<(f64, f64)> = self
            .edges
            .iter()
            .filter_map(|e| Some((e.amplitude_k?.abs(), e.tau_s?)))
            .collect();
        if fits.is_empty() {
            return None;
        }
        let a: Vec<f64> = fits.iter().map(|f| f.0).collect();
        let t: Vec<f64> = fits.iter().map(|f| f.1).collect();
        Some((mean(&a), mean(&t)))
    }

    pub fn max_abs_drift_k(&self) -> f64 {
        self.edges.iter().map(|e| e.drift_k.abs()).fold(0.0, f64::max)
    }
}

const EARLY_FRACTION: f64 = 0.1;
const LATE_FRACTION: f64 = 0.3;

/// Stripline heating observed through per-sample pulsed-ODMR dip fits.
pub fn run_chopped_dc(scene: &Scene, drive: &HeaterDrive, opts: &ChoppedDcOptions) -> Result<ChoppedDcRun> {
    drive.current.validate()?;
    if !drive.current.repeat {
        return Err(invalid("current", "chopped waveform must repeat"));
    }
    if opts.cycles == 0 || !(opts.sample_time_s > 0.0) {
        return Err(invalid("cycles", "need >= 1 cycle and sample_time > 0"));
    }
    let source = scene
        .stripline_source()
        .ok_or_else(|| invalid("heat_sources", "scene has no stripline source"))?;
    let period = drive.current.period();
    let per_cycle = (period / opts.sample_time_s).round() as usize;
    if ((per_cycle as f64) * opts.sample_time_s - period).abs() > 1e-9 * period {
        return Err(invalid("sample_time", "must divide the chopping period"));
    }
    let mut boundary = 0.0;
    for &(d, _) in &drive.current.segments {
        boundary += d;
        let k = boundary / opts.sample_time_s;
        if (k - k.round()).abs() > 1e-6 {
            return Err(invalid("sample_time", "must divide every waveform segment"));
        }
    }

    let n = per_cycle * opts.cycles;
    let warm = opts.warmup_cycles as f64 * period;
    let mids: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) * opts.sample_time_s).collect();
    let thermal_times: Vec<f64> = mids.iter().map(|t| t + warm).collect();
    let t_env = scene.environment.base_k;
    let trace = stripline_response(
        &drive.current,
        drive.i0_a,
        source,
        drive.field_per_ampere_g,
        t_env,
        &thermal_times,
    )?;
    let laser = scene.laser_excess(scene.sequence.t_w_ns * 1e-9)?;
    let t_ref = t_env + laser;
    let axis = scene.sensor.nv.axis;
    let f_base = scene.sensor.f_minus(t_ref)?;
    let dfdt = scene.sensor.susceptibility_dfdt(t_ref)?;
    let jump_for = |b: f64| -> Result<f64> {
        Ok(scene.sensor.transitions_with_extra_field(t_ref, &(axis * b))?.f_minus - f_base)
    };

    let points = (2.0 * opts.half_span_mhz / opts.step_mhz).round() as u64 + 1;
    let shots = (scene.sequence.repetitions_in(opts.sample_time_s) / points).max(1);
    let sweep = SweepOptions {
        half_span_mhz: opts.half_span_mhz,
        step_mhz: opts.step_mhz,
        shots_per_point: shots,
    };
    let seed = super::stream_seed(scene.seed, STREAM_HEATER);
    let measured: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let b = trace.b_wire[k];
            let jump = jump_for(b)?;
            let center = track_center(
                scene,
                trace.t_local[k] + laser,
                &(axis * b),
                f_base + jump,
                &sweep,
                seed,
                k as u64,
            )?;
            Ok((center, jump))
        })
        .collect::<Result<_>>()?;
    let f_measured: Vec<f64> = measured.iter().map(|m| m.0).collect();
    let delta_t: Vec<f64> = measured
        .iter()
        .map(|&(f, jump)| (f - jump - f_base) / dfdt)
        .collect();

    let folded: Vec<f64> = (0..per_cycle)
        .map(|j| mean(&(0..opts.cycles).map(|c| delta_t[c * per_cycle + j]).collect::<Vec<_>>()))
        .collect();
    let folded_time: Vec<f64> = mids[..per_cycle].to_vec();

    let mut edges = Vec::new();
    let mut start = 0.0;
    for (seg, &(d, level)) in drive.current.segments.iter().enumerate() {
        let j0 = (start / opts.sample_time_s).round() as usize;
        let j1 = ((start + d) / opts.sample_time_s).round() as usize;
        let t_rel: Vec<f64> = folded_time[j0..j1].iter().map(|t| t - start).collect();
        let y_mk: Vec<f64> = folded[j0..j1].iter().map(|v| v * 1e3).collect();
        let (amplitude, tau, offset) = match fit_exponential(&t_rel, &y_mk) {
            Ok(fit) if fit.converged && !fit.has_flag("non_positive_decay") => (
                fit.get("amplitude").map(|v| v * 1e-3),
                fit.get("tau"),
                fit.get("offset").map(|v| v * 1e-3),
            ),
            _ => (None, None, None),
        };
        let m = j1 - j0;
        let early = ((m as f64 * EARLY_FRACTION).round() as usize).max(1);
        let late = ((m as f64 * LATE_FRACTION).round() as usize).max(1);
        let drift = mean(&folded[j1 - late..j1]) - mean(&folded[j0..j0 + early]);

        // Raw frequency step across the edge into this segment, over all cycles.
        let before = if j0 == 0 { per_cycle - 1 } else { j0 - 1 };
        let steps: Vec<f64> = (0..opts.cycles)
            .filter(|&c| c > 0 || j0 > 0)
            .map(|c| {
                let after = c * per_cycle + j0;
                let prev = if j0 == 0 { (c - 1) * per_cycle + before } else { c * per_cycle + before };
                f_measured[after] - f_measured[prev]
            })
            .collect();
        let prev_level = drive.current.segments[(seg + drive.current.segments.len() - 1) % drive.current.segments.len()].1;
        edges.push(EdgeAnalysis {
            start_s: start,
            current_a: level,
            measured_jump_mhz: if steps.is_empty() { f64::NAN } else { mean(&steps) },
            expected_jump_mhz: jump_for(drive.field_per_ampere_g * level)?
                - jump_for(drive.field_per_ampere_g * prev_level)?,
            amplitude_k: amplitude,
            tau_s: tau,
            offset_k: offset,
            drift_k: drift,
        });
        start += d;
    }

    Ok(ChoppedDcRun {
        time_s: mids,
        current_a: thermal_times.iter().map(|&t| drive.current.level_at(t)).collect(),
        b_wire_g: trace.b_wire,
        f_measured_mhz: f_measured,
        delta_t_k: delta_t,
        true_delta_t_k: trace.t_local.iter().map(|t| t - t_env).collect(),
        folded_time_s: folded_time,
        folded_delta_t_k: folded,
        edges,
        dfdt_mhz_per_k: dfdt,
        rng_seed: seed,
    })
}
