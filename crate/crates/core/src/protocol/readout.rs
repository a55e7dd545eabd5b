use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Bright (ms = 0) and dark (ms = ±1) photon rates in a fixed readout window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub rate_bright: f64,
    pub rate_dark: f64,
    /// Mean detected photons per second of sequence time (1/s).
    pub effective_rate: f64,
}

impl ReadoutModel {
    /// Rates for which the normalized signal of one repetition per `t_r`
    /// carries `effective_rate` photons per second.
    pub fn from_effective_rate(effective_rate: f64, contrast: f64, t_r_ns: f64, window_ns: f64) -> Result<Self> {
        if !(effective_rate > 0.0) {
            return Err(invalid("effective_rate", "must be > 0"));
        }
        if !(contrast > 0.0 && contrast < 1.0) {
            return Err(invalid("contrast", "must lie in (0, 1)"));
        }
        if !(t_r_ns > 0.0 && window_ns > 0.0) {
            return Err(invalid("window_ns", "timings must be > 0"));
        }
        let rate_bright = effective_rate * t_r_ns / window_ns;
        Ok(Self {
            rate_bright,
            rate_dark: rate_bright * (1.0 - contrast),
            effective_rate,
        })
    }

    pub fn contrast(&self) -> f64 {
        (self.rate_bright - self.rate_dark) / self.rate_bright
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_bright > self.rate_dark && self.rate_dark > 0.0) {
            return Err(invalid("readout", "need rate_bright > rate_dark > 0"));
        }
        if !(self.effective_rate > 0.0) {
            return Err(invalid("effective_rate", "must be > 0"));
        }
        Ok(())
    }

    /// Expected counts of one window for ms = 0 population `p0`.
    pub fn mean_counts(&self, p0: f64, window_ns: f64) -> f64 {
        (p0 * self.rate_bright + (1.0 - p0) * self.rate_dark) * window_ns * 1e-9
    }

    /// Normalized signal: counts over the all-bright expectation.
    pub fn normalize(&self, counts: u64, shots: u64, window_ns: f64) -> f64 {
        counts as f64 / (shots as f64 * self.rate_bright * window_ns * 1e-9)
    }
}

pub fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    // `Poisson::new` only fails for non-positive or non-finite means.
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

/// Photon counts of one readout window.
pub fn simulate_readout<R: Rng + ?Sized>(p0: f64, window_ns: f64, model: &ReadoutModel, rng: &mut R) -> Result<u64> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(invalid("p0", "must lie in [0, 1]"));
    }
    Ok(poisson(model.mean_counts(p0, window_ns), rng))
}

/// Total counts of `shots` identical windows (a sum of independent Poisson
/// draws is a single Poisson draw of the summed mean).
pub fn simulate_shots<R: Rng + ?Sized>(
    p0: f64,
    shots: u64,
    window_ns: f64,
    model: &ReadoutModel,
    rng: &mut R,
) -> Result<u64> {
    if !(0.0..=1.0).contains(&p0) {
        return Err(invalid("p0", "must lie in [0, 1]"));
    }
    Ok(poisson(shots as f64 * model.mean_counts(p0, window_ns), rng))
}
