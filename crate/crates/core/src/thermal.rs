//! Lumped first-order thermal model of the sensor.
//!
//! Every heat source relaxes the local temperature toward
//! `T_env + Σ amplitude·|level|` with its own time constant. Drives are
//! piecewise constant, so each interval is integrated with the closed-form
//! exponential.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::protocol::PulseSequence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    pub t_local: f64,
    pub t_env: f64,
    /// Seconds.
    pub time: f64,
}

impl ThermalState {
    pub fn at_equilibrium(t_env: f64) -> Self {
        Self {
            t_local: t_env,
            t_env,
            time: 0.0,
        }
    }

    pub fn excess(&self) -> f64 {
        self.t_local - self.t_env
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatKind {
    LaserPulse,
    StriplineDc,
}

/// Piecewise-constant schedule of `(duration_s, level)` pairs starting at t = 0.
///
/// Outside the schedule (t < 0, or past the end of a non-repeating one) the
/// level is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waveform {
    pub segments: Vec<(f64, f64)>,
    pub repeat: bool,
}

impl Waveform {
    pub fn constant(level: f64) -> Self {
        Self {
            segments: vec![(f64::INFINITY, level)],
            repeat: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(invalid("waveform", "needs at least one segment"));
        }
        for &(d, level) in &self.segments {
            if !(d > 0.0) {
                return Err(invalid("waveform", "segment durations must be > 0"));
            }
            if !level.is_finite() {
                return Err(invalid("waveform", "levels must be finite"));
            }
        }
        if self.repeat && !self.period().is_finite() {
            return Err(invalid("waveform", "a repeating waveform needs a finite period"));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        self.segments.iter().map(|s| s.0).sum()
    }

    fn locate(&self, t: f64) -> Option<(usize, f64)> {
        if t < 0.0 {
            return None;
        }
        let period = self.period();
        let (k, local) = if self.repeat {
            let k = (t / period).floor();
            (k, t - k * period)
        } else {
            (0.0, t)
        };
        let mut start = 0.0;
        for (i, &(d, _)) in self.segments.iter().enumerate() {
            if local < start + d {
                return Some((i, k * period + start));
            }
            start += d;
        }
        if self.repeat {
            // Rounding put `local` at the very end of the period.
            Some((0, (k + 1.0) * period))
        } else {
            None
        }
    }

    pub fn level_at(&self, t: f64) -> f64 {
        match self.locate(t) {
            Some((i, _)) => self.segments[i].1,
            None => 0.0,
        }
    }

    /// First level change strictly after `t`, if any.
    pub fn next_breakpoint(&self, t: f64) -> Option<f64> {
        if t < 0.0 {
            return Some(0.0);
        }
        let (i, start) = self.locate(t)?;
        let end = start + self.segments[i].0;
        if end.is_finite() && end > t {
            Some(end)
        } else if end.is_finite() {
            self.next_breakpoint(end + f64::EPSILON * end.abs().max(1.0))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatSource {
    pub kind: HeatKind,
    /// Steady-state temperature rise at unit level (K).
    pub amplitude: f64,
    /// Relaxation time constant (s).
    pub tau: f64,
    pub waveform: Waveform,
}

impl HeatSource {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(invalid("tau", "must be > 0"));
        }
        if !self.amplitude.is_finite() {
            return Err(invalid("amplitude", "must be finite"));
        }
        self.waveform.validate()
    }

    /// Laser source switched on for `laser_init_ns` at the start of every `t_r_ns`.
    pub fn laser_train(amplitude: f64, tau: f64, seq: &PulseSequence) -> Result<Self> {
        let (on, period) = laser_timing(seq)?;
        Ok(Self {
            kind: HeatKind::LaserPulse,
            amplitude,
            tau,
            waveform: Waveform {
                segments: vec![(on, 1.0), (period - on, 0.0)],
                repeat: true,
            },
        })
    }
}

fn laser_timing(seq: &PulseSequence) -> Result<(f64, f64)> {
    seq.validate()
        .map_err(|e| Error::NonPeriodic(e.to_string()))?;
    let on = seq.laser_init_ns * 1e-9;
    let period = seq.t_r_ns * 1e-9;
    if !(on > 0.0) || !(period > on) {
        return Err(Error::NonPeriodic(
            "laser pulse must be shorter than the repetition interval".into(),
        ));
    }
    Ok((on, period))
}

/// Advance `state` by `dt` seconds.
pub fn step(state: &ThermalState, dt: f64, sources: &[HeatSource]) -> Result<ThermalState> {
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be > 0"));
    }
    let mut out = *state;
    let t_end = state.time + dt;
    if sources.is_empty() {
        out.time = t_end;
        return Ok(out);
    }
    let tau_all = sources.iter().map(|s| s.tau).fold(f64::INFINITY, f64::min);
    let mut t = state.time;
    while t < t_end {
        let next = sources
            .iter()
            .filter_map(|s| s.waveform.next_breakpoint(t))
            .filter(|&b| b > t)
            .fold(t_end, f64::min);
        let mid = 0.5 * (t + next);
        let mut drive = 0.0;
        let mut tau = f64::INFINITY;
        for s in sources {
            let level = s.waveform.level_at(mid);
            if level != 0.0 {
                drive += s.amplitude * level.abs();
                tau = tau.min(s.tau);
            }
        }
        if !tau.is_finite() {
            tau = tau_all;
        }
        let target = out.t_env + drive;
        out.t_local = target + (out.t_local - target) * (-(next - t) / tau).exp();
        t = next;
    }
    out.time = t_end;
    Ok(out)
}

/// Temperatures at increasing sample times, starting from `state`.
pub fn trace(state: &ThermalState, sources: &[HeatSource], times: &[f64]) -> Result<Vec<f64>> {
    let mut s = *state;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if t < s.time {
            return Err(invalid("times", "must be non-decreasing and after the initial state"));
        }
        if t > s.time {
            s = step(&s, t - s.time, sources)?;
        }
        out.push(s.t_local);
    }
    Ok(out)
}

/// Constant-level amplitude that makes the periodic steady state reach
/// `peak_excess` at the end of each laser pulse.
pub fn laser_amplitude_for_peak_excess(peak_excess: f64, tau: f64, seq: &PulseSequence) -> Result<f64> {
    let (on, period) = laser_timing(seq)?;
    if !(tau > 0.0) {
        return Err(invalid("tau", "must be > 0"));
    }
    Ok(peak_excess * (-(-period / tau).exp_m1()) / (-(-on / tau).exp_m1()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicTrace {
    pub period_s: f64,
    /// Repetitions simulated before the period-to-period change fell below 0.1%.
    pub periods_to_settle: usize,
    /// `(t_w_s, T_local)` with t_w measured from the end of the laser pulse.
    pub samples: Vec<(f64, f64)>,
}

const SETTLE_REL: f64 = 1e-3;

/// Periodic steady state of a laser pulse train, sampled at waiting times `t_w_s`.
pub fn pulse_train_response(
    seq: &PulseSequence,
    source: &HeatSource,
    duration: f64,
    t_env: f64,
    t_w_s: &[f64],
) -> Result<PeriodicTrace> {
    let laser = HeatSource::laser_train(source.amplitude, source.tau, seq)?;
    let (on, period) = laser_timing(seq)?;
    for &t in t_w_s {
        if !(t >= 0.0) || on + t > period {
            return Err(invalid("t_w", "waiting time must lie within the repetition interval"));
        }
    }
    let sources = [laser];
    let mut state = ThermalState::at_equilibrium(t_env);
    let mut previous = f64::NAN;
    let mut periods = 0usize;
    loop {
        state = step(&state, period, &sources)?;
        periods += 1;
        let peak = step(&state, on, &sources)?.excess();
        let change = (peak - previous).abs();
        if change <= SETTLE_REL * peak.abs() || peak == 0.0 {
            break;
        }
        previous = peak;
        if periods as f64 * period > duration {
            return Err(Error::NotSettled { duration_s: duration });
        }
    }
    let start = state.time;
    let times: Vec<f64> = t_w_s.iter().map(|&t| start + on + t).collect();
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| times[i]).collect();
    let temps = trace(&state, &sources, &sorted)?;
    let mut samples = vec![(0.0, 0.0); times.len()];
    for (k, &i) in order.iter().enumerate() {
        samples[i] = (t_w_s[i], temps[k]);
    }
    Ok(PeriodicTrace {
        period_s: period,
        periods_to_settle: periods,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StriplineTrace {
    pub time_s: Vec<f64>,
    pub t_local: Vec<f64>,
    /// Wire field projected on the NV axis (G).
    pub b_wire: Vec<f64>,
}

/// Heating follows |I/I0| with the source's time constant; the wire field
/// follows the signed current instantly.
pub fn stripline_response(
    current: &Waveform,
    i0: f64,
    source: &HeatSource,
    field_per_ampere: f64,
    t_env: f64,
    times: &[f64],
) -> Result<StriplineTrace> {
    current.validate()?;
    source.validate()?;
    if !(i0 > 0.0) {
        return Err(invalid("i0", "reference current must be > 0"));
    }
    let heat = HeatSource {
        kind: HeatKind::StriplineDc,
        amplitude: source.amplitude,
        tau: source.tau,
        waveform: Waveform {
            segments: current.segments.iter().map(|&(d, i)| (d, (i / i0).abs())).collect(),
            repeat: current.repeat,
        },
    };
    let state = ThermalState::at_equilibrium(t_env);
    let t_local = trace(&state, &[heat], times)?;
    let b_wire = times
        .iter()
        .map(|&t| field_per_ampere * current.level_at(t))
        .collect();
    Ok(StriplineTrace {
        time_s: times.to_vec(),
        t_local,
        b_wire,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq() -> PulseSequence {
        PulseSequence::default()
    }

    #[test]
    fn equilibrium_without_sources() {
        let s = ThermalState::at_equilibrium(300.0);
        let out = step(&s, 1.0, &[]).unwrap();
        assert_eq!(out.t_local, 300.0);
        assert_eq!(out.time, 1.0);
    }

    #[test]
    fn held_source_reaches_steady_state() {
        let src = HeatSource {
            kind: HeatKind::StriplineDc,
            amplitude: 0.01,
            tau: 1.0,
            waveform: Waveform::constant(1.0),
        };
        let out = step(&ThermalState::at_equilibrium(300.0), 20.0, &[src]).unwrap();
        assert!((out.excess() - 0.01).abs() < 1e-6 * 0.01);
    }

    #[test]
    fn laser_decay_after_switch_off() {
        let src = HeatSource {
            kind: HeatKind::LaserPulse,
            amplitude: 0.02,
            tau: 0.5e-6,
            waveform: Waveform {
                segments: vec![(1.0, 0.0)],
                repeat: false,
            },
        };
        let s = ThermalState {
            t_local: 300.02,
            t_env: 300.0,
            time: 0.0,
        };
        let t = trace(&s, &[src], &[0.5e-6, 1.5e-6]).unwrap();
        assert!(((t[0] - 300.0) - 0.02 * (-1.0_f64).exp()).abs() < 1e-12);
        assert!(t[1] - 300.0 < 1e-3);
    }

    #[test]
    fn halving_the_step_is_exact() {
        let src = HeatSource::laser_train(0.044, 0.5e-6, &seq()).unwrap();
        let s = ThermalState::at_equilibrium(298.0);
        let coarse = step(&s, 37e-6, std::slice::from_ref(&src)).unwrap();
        let mut fine = s;
        for _ in 0..2 {
            fine = step(&fine, 18.5e-6, std::slice::from_ref(&src)).unwrap();
        }
        assert!(((coarse.t_local - fine.t_local) / coarse.t_local).abs() < 1e-12);
    }

    #[test]
    fn pulse_train_peak_and_recovery() {
        let sq = seq();
        let a = laser_amplitude_for_peak_excess(0.02, 0.5e-6, &sq).unwrap();
        let src = HeatSource::laser_train(a, 0.5e-6, &sq).unwrap();
        let tr = pulse_train_response(&sq, &src, 1.0, 298.0, &[0.0, 1.5e-6, 10e-6]).unwrap();
        let ex: Vec<f64> = tr.samples.iter().map(|s| s.1 - 298.0).collect();
        assert!((ex[0] - 0.02).abs() < 2e-5);
        assert!(ex[1] < 1e-3);
        assert!(ex[2] < 1e-5);
        assert!(ex[0] > ex[1] && ex[1] > ex[2]);
    }

    #[test]
    fn stripline_polarity_only_flips_field() {
        let src = HeatSource {
            kind: HeatKind::StriplineDc,
            amplitude: 0.01,
            tau: 1.0,
            waveform: Waveform::constant(0.0),
        };
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        let pos = Waveform {
            segments: vec![(5.0, 1.0), (5.0, 0.0)],
            repeat: true,
        };
        let neg = Waveform {
            segments: vec![(5.0, -1.0), (5.0, 0.0)],
            repeat: true,
        };
        let a = stripline_response(&pos, 1.0, &src, 2.0, 300.0, &times).unwrap();
        let b = stripline_response(&neg, 1.0, &src, 2.0, 300.0, &times).unwrap();
        assert_eq!(a.t_local, b.t_local);
        for (x, y) in a.b_wire.iter().zip(&b.b_wire) {
            assert_eq!(*x, -*y);
        }
        let near_end = a.t_local[49] - 300.0;
        assert!((near_end - 0.01 * (1.0 - (-4.9_f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn zero_current_is_inert() {
        let src = HeatSource {
            kind: HeatKind::StriplineDc,
            amplitude: 0.01,
            tau: 1.0,
            waveform: Waveform::constant(0.0),
        };
        let times = [0.0, 1.0, 2.0];
        let r = stripline_response(&Waveform::constant(0.0), 1.0, &src, 3.0, 300.0, &times).unwrap();
        assert!(r.t_local.iter().all(|&t| t == 300.0));
        assert!(r.b_wire.iter().all(|&b| b == 0.0));
    }
}
