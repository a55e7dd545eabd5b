//! Least-squares fitting and sensitivity analysis.

mod calibration;
mod exponential;
mod fid;
mod gaussian;
mod integration;
pub mod lm;
mod lorentzian;
mod sensitivity;

use serde::{Deserialize, Serialize};

pub use calibration::{calibrate_temperature, TemperatureCalibration};
pub use exponential::fit_exponential;
pub use fid::{fit_fid, FidFitOptions};
pub use gaussian::{fit_gaussian_histogram, GaussianFit};
pub use integration::{stddev_vs_integration, IntegrationAnalysis};
pub use lorentzian::{fit_lorentzian_multi, LorentzianFitOptions};
pub use sensitivity::{estimate_sensitivity, optimal_wait, SensitivityInputs, SensitivityReport};

use lm::LmOutcome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: Vec<FitParam>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Residual norm after every accepted step.
    pub residual_history: Vec<f64>,
    pub flags: Vec<String>,
}

impl FitResult {
    pub(crate) fn from_outcome(names: &[String], out: &LmOutcome) -> Self {
        let params = names
            .iter()
            .zip(out.params.iter().zip(&out.stderr))
            .map(|(name, (&value, &stderr))| FitParam {
                name: name.clone(),
                value,
                stderr,
            })
            .collect();
        let mut flags = Vec::new();
        if !out.converged {
            flags.push("not_converged".to_string());
        }
        Self {
            params,
            residual_norm: out.cost().sqrt(),
            iterations: out.iterations,
            converged: out.converged,
            residual_history: out.cost_history.iter().map(|c| c.sqrt()).collect(),
            flags,
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }

    pub fn stderr(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.stderr)
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }

    pub(crate) fn flag(&mut self, flag: &str) {
        if !self.has_flag(flag) {
            self.flags.push(flag.to_string());
        }
    }
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}
