//! Simulation and estimation core for a magnetic-nanoparticle / NV-center
//! hybrid nanothermometer.
//!
//! The measurement chain is split into the same stages a bench experiment
//! goes through:
//!
//! 1. [`magnet`]: Weiss mean-field magnetization of the nanoparticle near its
//!    Curie point and the dipolar field it produces at the NV center.
//! 2. [`nvspin`]: spin-1 ground-state Hamiltonian, transition frequencies,
//!    ODMR line shapes and the free-induction-decay (Ramsey) signal.
//! 3. [`thermal`]: lumped first-order thermal dynamics for laser self-heating
//!    and stripline (chopped DC) heating.
//! 4. [`protocol`]: pulse sequences, Poisson photon readout and the simulated
//!    experiments (pulsed ODMR, cooling scan, FID scan, real-time tracking,
//!    chopped-DC heating).
//! 5. [`fitters`]: damped least-squares fitting, sensitivity estimation,
//!    integration-time analysis and reference-NV temperature calibration.
//!
//! Units follow the lab convention used throughout: frequencies in MHz,
//! fields in Gauss, temperatures in kelvin, spin-evolution times in µs,
//! sequence timing in ns and thermal / acquisition time in seconds.

pub mod error;
pub mod fitters;
pub mod magnet;
pub mod nvspin;
pub mod protocol;
pub mod scenario;
pub mod stats;
pub mod thermal;

pub use error::{Error, Result};

/// Cartesian 3-vector used for fields, moments and positions.
pub type Vec3 = nalgebra::Vector3<f64>;
