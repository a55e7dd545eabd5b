//! Config-driven runner for the nvtherm simulations.
//!
//! Every subcommand reads one TOML scenario, writes plot-ready CSV files and
//! a JSON manifest into the output directory, and is deterministic for a
//! fixed seed.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::Path;

pub use config::Config;
pub use error::CliError;
pub use output::{Run, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Demag,
    Odmr,
    Fid,
    Cooling,
    Track,
    Heater,
    Sensitivity,
    Calibrate,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::Demag,
        Experiment::Odmr,
        Experiment::Fid,
        Experiment::Cooling,
        Experiment::Track,
        Experiment::Heater,
        Experiment::Sensitivity,
        Experiment::Calibrate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Demag => "demag",
            Experiment::Odmr => "odmr",
            Experiment::Fid => "fid",
            Experiment::Cooling => "cooling",
            Experiment::Track => "track",
            Experiment::Heater => "heater",
            Experiment::Sensitivity => "sensitivity",
            Experiment::Calibrate => "calibrate",
        }
    }
}

/// Apply the command-line overrides shared by all subcommands.
pub fn apply_overrides(config: &mut Config, seed: Option<u64>, shots: Option<u64>) {
    if let Some(seed) = seed {
        config.scene.seed = seed;
    }
    if let Some(n) = shots {
        config.odmr.shots_per_point = n;
        config.fid.shots_per_point = n;
        config.cooling.shots_per_point = n;
        config.calibrate.shots_per_point = n;
    }
}

pub fn run_experiment(exp: Experiment, config: &Config, out: &Path) -> Result<RunManifest, CliError> {
    let mut run = Run::start(out, exp.name())?;
    match exp {
        Experiment::Demag => commands::demag(config, &mut run)?,
        Experiment::Odmr => commands::odmr(config, &mut run)?,
        Experiment::Fid => commands::fid(config, &mut run)?,
        Experiment::Cooling => commands::cooling(config, &mut run)?,
        Experiment::Track => commands::track(config, &mut run)?,
        Experiment::Heater => commands::heater(config, &mut run)?,
        Experiment::Sensitivity => commands::sensitivity(config, &mut run)?,
        Experiment::Calibrate => commands::calibrate(config, &mut run)?,
    }
    run.finish(config)
}
