use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nvspin::NvParams;

/// Heater setting to temperature map derived from reference-NV zero-field splittings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureCalibration {
    pub settings: Vec<f64>,
    pub temperatures: Vec<f64>,
    /// False when D is not strictly monotonic in the setting.
    pub monotonic: bool,
}

impl TemperatureCalibration {
    /// Piecewise-linear interpolation, extrapolating the end segments.
    pub fn temperature_at(&self, setting: f64) -> f64 {
        let s = &self.settings;
        let t = &self.temperatures;
        let n = s.len();
        let k = s.partition_point(|&x| x <= setting).clamp(1, n - 1);
        let (s0, s1, t0, t1) = (s[k - 1], s[k], t[k - 1], t[k]);
        if s1 == s0 {
            return t0;
        }
        t0 + (t1 - t0) * (setting - s0) / (s1 - s0)
    }
}

pub fn calibrate_temperature(points: &[(f64, f64)], nv: &NvParams) -> Result<TemperatureCalibration> {
    if points.len() < 2 {
        return Err(Error::InsufficientData("calibration needs at least two points".into()));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let temperatures: Vec<f64> = pts
        .iter()
        .map(|&(_, d)| nv.t0 + (d - nv.d_zfs0) / nv.dd_dt)
        .collect();
    let d: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let inc = d.windows(2).all(|w| w[1] > w[0]);
    let dec = d.windows(2).all(|w| w[1] < w[0]);
    Ok(TemperatureCalibration {
        settings: pts.iter().map(|p| p.0).collect(),
        temperatures,
        monotonic: inc || dec,
    })
}
