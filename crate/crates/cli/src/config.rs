//! Scenario file: the scene plus one table per experiment.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nvtherm_core::protocol::{ChoppedDcOptions, Inversion};
use nvtherm_core::scenario::ScenarioParams;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scene: ScenarioParams,
    pub demag: DemagConfig,
    pub odmr: OdmrConfig,
    pub fid: FidConfig,
    pub cooling: CoolingConfig,
    pub track: TrackConfig,
    pub heater: HeaterConfig,
    pub sensitivity: SensitivityConfig,
    pub calibrate: CalibrateConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemagConfig {
    pub t_min_k: f64,
    pub t_max_k: f64,
    pub t_step_k: f64,
    /// Field magnitude for the m(T) column; the scene's |B_ext| when absent.
    pub field_g: Option<f64>,
}

impl Default for DemagConfig {
    fn default() -> Self {
        Self {
            t_min_k: 250.0,
            t_max_k: 400.0,
            t_step_k: 0.5,
            field_g: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OdmrConfig {
    pub temperatures_k: Vec<f64>,
    pub half_span_mhz: f64,
    pub step_mhz: f64,
    pub shots_per_point: u64,
}

impl Default for OdmrConfig {
    fn default() -> Self {
        Self {
            temperatures_k: (0..14).map(|k| 298.0 + 2.0 * k as f64).collect(),
            half_span_mhz: 4.0,
            step_mhz: 0.1,
            shots_per_point: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FidConfig {
    pub tau_max_us: f64,
    pub tau_step_us: f64,
    pub delta_f_mhz: f64,
    pub shots_per_point: u64,
    /// Hold ν at this value in the fit.
    pub fixed_nu: Option<f64>,
}

impl Default for FidConfig {
    fn default() -> Self {
        Self {
            tau_max_us: 5.0,
            tau_step_us: 0.025,
            delta_f_mhz: 2.7,
            shots_per_point: 1_000_000,
            fixed_nu: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoolingConfig {
    pub t_w_ns: Vec<f64>,
    pub half_span_mhz: f64,
    pub step_mhz: f64,
    pub shots_per_point: u64,
}

impl Default for CoolingConfig {
    fn default() -> Self {
        Self {
            t_w_ns: vec![
                0.0, 100.0, 200.0, 300.0, 500.0, 700.0, 1000.0, 1500.0, 2000.0, 3000.0, 5000.0, 10_000.0,
            ],
            half_span_mhz: 4.0,
            step_mhz: 0.1,
            shots_per_point: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackConfig {
    pub duration_s: f64,
    pub sample_time_s: f64,
    /// Fixed free-evolution time; the computed optimum when absent.
    pub tau_us: Option<f64>,
    pub delta_f_mhz: f64,
    pub inversion: Inversion,
    pub histogram_bins: usize,
    pub windows_s: Vec<f64>,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            duration_s: 30.0,
            sample_time_s: 5e-3,
            tau_us: None,
            delta_f_mhz: 2.7,
            inversion: Inversion::FirstOrder,
            histogram_bins: 40,
            windows_s: vec![5e-3, 1e-2, 2e-2, 5e-2, 0.1, 0.2, 0.5, 1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeaterConfig {
    /// `[duration_s, current_a]` pairs of one chopping period.
    pub current: Vec<(f64, f64)>,
    pub i0_a: f64,
    pub field_per_ampere_g: f64,
    /// Also run the constant-|I| polarity-reversal control.
    pub control: bool,
    pub options: ChoppedDcOptions,
}

impl Default for HeaterConfig {
    fn default() -> Self {
        Self {
            current: vec![(10.0, 1.0), (10.0, 0.0)],
            i0_a: 1.0,
            field_per_ampere_g: 0.5,
            control: true,
            options: ChoppedDcOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityConfig {
    /// Detuning of the Ramsey working point (MHz).
    pub delta_f_mhz: f64,
    /// Temperature at which df/dT is taken; the scene's base when absent.
    pub temperature_k: Option<f64>,
    pub curve_points: usize,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            delta_f_mhz: 2.7,
            temperature_k: None,
            curve_points: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateConfig {
    /// Measured `[setting, D_MHz]` pairs. When empty a synthetic heater
    /// curve is measured on a particle-free reference NV instead.
    pub points: Vec<(f64, f64)>,
    pub settings: Vec<f64>,
    /// Synthetic heater: T = base + coefficient·setting².
    pub base_k: f64,
    pub coefficient_k: f64,
    pub reference_field_g: f64,
    pub shots_per_point: u64,
}

impl Default for CalibrateConfig {
    fn default() -> Self {
        Self {
            points: Vec::new(),
            settings: (0..=8).map(f64::from).collect(),
            base_k: 298.0,
            coefficient_k: 0.5,
            reference_field_g: 20.0,
            shots_per_point: 100_000,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// JSON with keys sorted at every level; stable under key reordering.
    pub fn normalized(&self) -> Result<String, CliError> {
        let value = serde_json::to_value(self).map_err(|e| CliError::Config(e.to_string()))?;
        serde_json::to_string(&value).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn hash(&self) -> Result<String, CliError> {
        let digest = Sha256::digest(self.normalized()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}
