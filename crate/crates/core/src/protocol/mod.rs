//! Pulse sequences, photon readout and the simulated experiments.
//!
//! Every experiment draws its counts from streams derived from the scene's
//! master seed and a per-point index, so results do not depend on how the
//! points are scheduled across threads.

mod acquire;
mod fid;
mod heater;
mod odmr;
mod readout;
mod scene;
pub mod seed;
mod sequence;
mod series;

pub use fid::{
    invert_signal, run_fid_scan, run_realtime_tracker, FidScan, Inversion, TrackerOptions, TrackerRun,
    WorkingPoint, RESPONSIVITY_FLOOR,
};
pub use heater::{run_chopped_dc, ChoppedDcOptions, ChoppedDcRun, EdgeAnalysis, HeaterDrive};
pub use odmr::{fixed_shape_center, odmr_model, run_cooling_scan, run_pulsed_odmr, CoolingScan, SweepOptions, COOLING_REFERENCE_NS};
pub use readout::{poisson, simulate_readout, simulate_shots, ReadoutModel};
pub use scene::{EnvironmentSchedule, Scene};
pub use seed::{derive_shot_seed, rng_for, stream_seed};
pub use sequence::{MwKind, MwOp, PulseSequence};
pub use series::ShotSeries;
