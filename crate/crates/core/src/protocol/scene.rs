use serde::{Deserialize, Serialize};

use super::{PulseSequence, ReadoutModel};
use crate::error::{invalid, Result};
use crate::magnet::HybridSensor;
use crate::thermal::{pulse_train_response, HeatKind, HeatSource, Waveform};

/// Environment temperature: a base value plus an optional piecewise offset (K).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSchedule {
    pub base_k: f64,
    pub offset: Option<Waveform>,
}

impl EnvironmentSchedule {
    pub fn constant(base_k: f64) -> Self {
        Self {
            base_k,
            offset: None,
        }
    }

    /// Symmetric square wave of peak-to-peak `amplitude_k` starting on the high half.
    pub fn square_wave(base_k: f64, amplitude_k: f64, period_s: f64) -> Self {
        Self {
            base_k,
            offset: Some(Waveform {
                segments: vec![
                    (0.5 * period_s, 0.5 * amplitude_k),
                    (0.5 * period_s, -0.5 * amplitude_k),
                ],
                repeat: true,
            }),
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        self.base_k + self.offset.as_ref().map_or(0.0, |w| w.level_at(t))
    }
}

/// Everything one simulated experiment needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub sensor: HybridSensor,
    pub readout: ReadoutModel,
    pub sequence: PulseSequence,
    /// The laser source's waveform is ignored; its timing comes from `sequence`.
    pub heat_sources: Vec<HeatSource>,
    pub environment: EnvironmentSchedule,
    pub seed: u64,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        self.readout.validate()?;
        self.sequence.validate()?;
        for s in &self.heat_sources {
            if !(s.tau > 0.0) || !s.amplitude.is_finite() {
                return Err(invalid("heat_sources", "tau must be > 0 and amplitude finite"));
            }
        }
        if (self.readout.contrast() - self.sensor.nv.contrast).abs() > 1e-6 {
            return Err(invalid(
                "readout",
                format!(
                    "implied contrast {} differs from NV contrast {}",
                    self.readout.contrast(),
                    self.sensor.nv.contrast
                ),
            ));
        }
        Ok(())
    }

    pub fn laser_source(&self) -> Option<&HeatSource> {
        self.heat_sources.iter().find(|s| s.kind == HeatKind::LaserPulse)
    }

    pub fn stripline_source(&self) -> Option<&HeatSource> {
        self.heat_sources.iter().find(|s| s.kind == HeatKind::StriplineDc)
    }

    /// Periodic-steady-state laser excess at the end of the laser pulse (K).
    pub fn laser_peak_excess(&self) -> Result<f64> {
        match self.laser_source() {
            None => Ok(0.0),
            Some(src) => {
                let env = self.environment.base_k;
                let tr = pulse_train_response(&self.sequence, src, 1.0, env, &[0.0])?;
                Ok(tr.samples[0].1 - env)
            }
        }
    }

    /// Laser excess `t_w_s` seconds after the pulse ends.
    pub fn laser_excess(&self, t_w_s: f64) -> Result<f64> {
        match self.laser_source() {
            None => Ok(0.0),
            Some(src) => Ok(self.laser_peak_excess()? * (-t_w_s / src.tau).exp()),
        }
    }

    /// Mean laser excess over `[t_w, t_w + window]` (s).
    pub fn mean_laser_excess(&self, t_w_s: f64, window_s: f64) -> Result<f64> {
        let Some(src) = self.laser_source() else {
            return Ok(0.0);
        };
        if window_s <= 0.0 {
            return self.laser_excess(t_w_s);
        }
        let start = self.laser_excess(t_w_s)?;
        Ok(start * src.tau / window_s * -(-window_s / src.tau).exp_m1())
    }
}
