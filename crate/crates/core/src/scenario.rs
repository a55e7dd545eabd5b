//! Declarative scene description with the defaults of the reference device.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::magnet::{HybridSensor, MnpModel};
use crate::nvspin::NvParams;
use crate::protocol::{EnvironmentSchedule, PulseSequence, ReadoutModel, Scene};
use crate::thermal::{laser_amplitude_for_peak_excess, HeatKind, HeatSource, Waveform};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTarget {
    pub dfdt_mhz_per_k: f64,
    pub t_peak_k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserHeating {
    /// Excess at the end of each laser pulse in the periodic steady state (K).
    pub peak_excess_k: f64,
    pub tau_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StriplineHeating {
    /// Steady-state rise at the reference current (K).
    pub amplitude_k: f64,
    pub tau_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub seed: u64,
    pub mnp: MnpModel,
    pub nv: NvParams,
    pub b_ext_g: Vec3,
    pub calibration: Option<CalibrationTarget>,
    /// Effective photon rate L_eff (1/s).
    pub l_eff: f64,
    pub sequence: PulseSequence,
    pub laser: Option<LaserHeating>,
    pub stripline: Option<StriplineHeating>,
    pub environment: EnvironmentSchedule,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self::reference()
    }
}

impl ScenarioParams {
    /// Single NV in a nanopillar next to a CuNi particle, transducer set to
    /// 47 MHz/K at 311 K, FID parameters from the Ramsey fit.
    pub fn reference() -> Self {
        Self {
            seed: 0x5EED_0311,
            mnp: MnpModel::default(),
            nv: NvParams {
                t2_star: 1.8,
                ..NvParams::default()
            },
            b_ext_g: Vec3::new(0.0, 0.0, 192.0),
            calibration: Some(CalibrationTarget {
                dfdt_mhz_per_k: 47.0,
                t_peak_k: 311.0,
            }),
            l_eff: 9.6e4,
            sequence: PulseSequence::default(),
            laser: Some(LaserHeating {
                peak_excess_k: 0.02,
                tau_s: 0.5e-6,
            }),
            stripline: Some(StriplineHeating {
                amplitude_k: 0.01,
                tau_s: 1.0,
            }),
            environment: EnvironmentSchedule::constant(311.0),
        }
    }

    pub fn second_sensor() -> Self {
        let mut p = Self::reference();
        p.nv.t2_star = 3.5;
        p.calibration = Some(CalibrationTarget {
            dfdt_mhz_per_k: 10.0,
            t_peak_k: 311.0,
        });
        p
    }

    pub fn third_sensor() -> Self {
        let mut p = Self::reference();
        p.nv.t2_star = 1.6;
        p.calibration = Some(CalibrationTarget {
            dfdt_mhz_per_k: 7.0,
            t_peak_k: 311.0,
        });
        p
    }

    /// Validated scene, with the transducer calibrated when a target is set.
    pub fn build(&self) -> Result<Scene> {
        let mut sensor = HybridSensor {
            mnp: self.mnp.clone(),
            nv: self.nv.clone(),
            b_ext: self.b_ext_g,
        };
        sensor.validate()?;
        if let Some(target) = self.calibration {
            sensor = sensor.calibrate_transducer(target.dfdt_mhz_per_k, target.t_peak_k)?;
        }
        let readout = ReadoutModel::from_effective_rate(
            self.l_eff,
            self.nv.contrast,
            self.sequence.t_r_ns,
            self.sequence.readout_window_ns,
        )?;
        self.sequence.validate()?;
        let mut heat_sources = Vec::new();
        if let Some(l) = self.laser {
            let amplitude = laser_amplitude_for_peak_excess(l.peak_excess_k, l.tau_s, &self.sequence)?;
            heat_sources.push(HeatSource::laser_train(amplitude, l.tau_s, &self.sequence)?);
        }
        if let Some(s) = self.stripline {
            heat_sources.push(HeatSource {
                kind: HeatKind::StriplineDc,
                amplitude: s.amplitude_k,
                tau: s.tau_s,
                waveform: Waveform::constant(0.0),
            });
        }
        let scene = Scene {
            sensor,
            readout,
            sequence: self.sequence.clone(),
            heat_sources,
            environment: self.environment.clone(),
            seed: self.seed,
        };
        scene.validate()?;
        Ok(scene)
    }
}
