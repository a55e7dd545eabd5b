//! Mean-field magnetization of the copper-nickel nanoparticle and the dipolar
//! field it projects onto the NV center.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::nvspin::{self, NvParams, TransitionPair};
use crate::Vec3;

/// µ0/4π in T·m/A.
pub const MU0_OVER_4PI: f64 = 1e-7;
pub const TESLA_TO_GAUSS: f64 = 1e4;

/// Step of the central difference used for df/dT (K).
pub const SUSCEPTIBILITY_STEP_K: f64 = 0.01;

const SOLVER_MAX_ITER: usize = 200;
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MnpModel {
    /// Curie temperature (K).
    pub t_curie: f64,
    /// Saturation moment (A·m²).
    pub m_sat: f64,
    /// Particle position relative to the NV center (m).
    pub position: Vec3,
    /// Unit axis; the moment follows the applied field, this is only used as
    /// the moment direction when no field is applied.
    pub easy_axis: Vec3,
    /// Converts the applied field into the mean-field argument (K/G).
    pub field_coupling: f64,
}

impl Default for MnpModel {
    fn default() -> Self {
        let t_curie = 310.0;
        Self {
            t_curie,
            m_sat: 1e-17,
            position: Vec3::new(200e-9, 0.0, 0.0),
            easy_axis: Vec3::z(),
            // 100 G shifts the mean-field argument by 1% of T_C.
            field_coupling: 1e-4 * t_curie,
        }
    }
}

impl MnpModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_curie > 0.0) {
            return Err(invalid("t_curie", "must be > 0"));
        }
        if !(self.m_sat >= 0.0) {
            return Err(invalid("m_sat", "must be >= 0"));
        }
        if !(self.position.norm() > 0.0) {
            return Err(Error::ZeroVector { what: "position" });
        }
        if (self.easy_axis.norm() - 1.0).abs() > 1e-12 {
            return Err(invalid("easy_axis", "must be unit norm"));
        }
        if !(self.field_coupling >= 0.0) {
            return Err(invalid("field_coupling", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedMagnetization {
    pub m: f64,
    pub residual: f64,
}

fn mean_field_residual(m: f64, a: f64, h: f64) -> f64 {
    m - (a * m + h).tanh()
}

/// Self-consistent solution of `m = tanh[(T_C·m + c·B)/T]`, field-aligned branch.
///
/// Newton iteration seeded at m = 1. On the positive half-line the residual is
/// convex, so the iterates decrease monotonically onto the largest root; a
/// bisection pass takes over if that ever fails to reach tolerance.
pub fn solve_magnetization(t: f64, b_ext: f64, model: &MnpModel) -> Result<ReducedMagnetization> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid("T", "temperature must be > 0"));
    }
    if !(b_ext >= 0.0) || !b_ext.is_finite() {
        return Err(invalid("B_ext", "field magnitude must be >= 0"));
    }
    let a = model.t_curie / t;
    let h = model.field_coupling * b_ext / t;
    if h == 0.0 && a <= 1.0 {
        return Ok(ReducedMagnetization {
            m: 0.0,
            residual: 0.0,
        });
    }

    let mut m = 1.0_f64;
    let mut residual = mean_field_residual(m, a, h);
    for _ in 0..SOLVER_MAX_ITER {
        if residual.abs() <= 1e-16 {
            break;
        }
        let sech2 = 1.0 - (a * m + h).tanh().powi(2);
        let slope = 1.0 - a * sech2;
        if !(slope > 0.0) {
            break;
        }
        let next = m - residual / slope;
        if !(next.is_finite()) || next > m || next < 0.0 {
            break;
        }
        if next == m {
            break;
        }
        m = next;
        residual = mean_field_residual(m, a, h);
    }
    if residual.abs() < RESIDUAL_TOL {
        return Ok(ReducedMagnetization {
            m,
            residual: residual.abs(),
        });
    }
    bisect_magnetization(a, h)
}

fn bisect_magnetization(a: f64, h: f64) -> Result<ReducedMagnetization> {
    let mut lo = 0.0_f64;
    if h == 0.0 {
        // Zero field below T_C: f(0) = 0, so find a strictly negative point.
        lo = 0.5;
        while mean_field_residual(lo, a, h) >= 0.0 {
            lo *= 0.5;
            if lo < 1e-300 {
                return Ok(ReducedMagnetization {
                    m: 0.0,
                    residual: 0.0,
                });
            }
        }
    }
    let mut hi = 1.0_f64;
    let mut iterations = 0;
    while iterations < 2000 && hi - lo > 0.0 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if mean_field_residual(mid, a, h) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let m = 0.5 * (lo + hi);
    let residual = mean_field_residual(m, a, h).abs();
    if residual < RESIDUAL_TOL {
        Ok(ReducedMagnetization { m, residual })
    } else {
        Err(Error::NoConvergence {
            iterations,
            residual,
        })
    }
}

pub fn moment_vector(m: &ReducedMagnetization, direction: &Vec3, model: &MnpModel) -> Result<Vec3> {
    let n = direction.norm();
    if !(n > 0.0) {
        return Err(Error::ZeroVector {
            what: "moment direction",
        });
    }
    Ok(direction / n * (m.m * model.m_sat))
}

/// Point-dipole field (G) at displacement `r` (m) from a moment `moment` (A·m²).
pub fn dipole_field(moment: &Vec3, r: &Vec3) -> Result<Vec3> {
    let d = r.norm();
    if !(d > 0.0) {
        return Err(Error::ZeroVector {
            what: "dipole displacement",
        });
    }
    let rhat = r / d;
    let b_tesla = (rhat * (3.0 * moment.dot(&rhat)) - moment) * (MU0_OVER_4PI / d.powi(3));
    Ok(b_tesla * TESLA_TO_GAUSS)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldAtNv {
    pub total: Vec3,
    pub parallel: f64,
}

pub fn field_at_nv(t: f64, b_ext: &Vec3, model: &MnpModel, nv_axis: &Vec3) -> Result<FieldAtNv> {
    let b_mag = b_ext.norm();
    let m = solve_magnetization(t, b_mag, model)?;
    let direction = if b_mag > 0.0 {
        b_ext / b_mag
    } else {
        model.easy_axis
    };
    let moment = moment_vector(&m, &direction, model)?;
    // `position` points from the NV to the particle.
    let total = b_ext + dipole_field(&moment, &(-model.position))?;
    Ok(FieldAtNv {
        total,
        parallel: total.dot(nv_axis),
    })
}

/// The coupled particle + NV sensor in a fixed applied field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridSensor {
    pub mnp: MnpModel,
    pub nv: NvParams,
    /// Applied bias field (G).
    pub b_ext: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SusceptibilityPeak {
    pub temperature: f64,
    /// |df₋/dT| at the peak (MHz/K).
    pub magnitude: f64,
    /// Signed df₋/dT at the peak (MHz/K).
    pub signed: f64,
}

impl HybridSensor {
    pub fn validate(&self) -> Result<()> {
        self.mnp.validate()?;
        self.nv.validate()
    }

    pub fn field_at_nv(&self, t: f64) -> Result<FieldAtNv> {
        field_at_nv(t, &self.b_ext, &self.mnp, &self.nv.axis)
    }

    pub fn transitions(&self, t: f64) -> Result<TransitionPair> {
        self.transitions_with_extra_field(t, &Vec3::zeros())
    }

    /// Transitions with an additional field at the NV only (e.g. a stripline).
    pub fn transitions_with_extra_field(&self, t: f64, extra: &Vec3) -> Result<TransitionPair> {
        let field = self.field_at_nv(t)?;
        let d = nvspin::d_of_temperature(t, &self.nv);
        nvspin::transition_frequencies(d, &(field.total + extra), &self.nv)
    }

    pub fn f_minus(&self, t: f64) -> Result<f64> {
        Ok(self.transitions(t)?.f_minus)
    }

    /// Central difference of f₋(T) with a 10 mK step (MHz/K).
    pub fn susceptibility_dfdt(&self, t: f64) -> Result<f64> {
        let h = SUSCEPTIBILITY_STEP_K;
        Ok((self.f_minus(t + h)? - self.f_minus(t - h)?) / (2.0 * h))
    }

    /// Maximum of |df₋/dT| inside `center ± half_width`.
    pub fn peak_susceptibility(&self, center: f64, half_width: f64) -> Result<SusceptibilityPeak> {
        let grid_step = 0.1;
        let n = (2.0 * half_width / grid_step).round().max(2.0) as usize;
        let lo = center - half_width;
        let step = 2.0 * half_width / n as f64;
        let mut best = (lo, f64::NEG_INFINITY);
        for i in 0..=n {
            let t = lo + step * i as f64;
            let v = self.susceptibility_dfdt(t)?.abs();
            if v > best.1 {
                best = (t, v);
            }
        }
        let (mut a, mut b) = (
            (best.0 - step).max(lo),
            (best.0 + step).min(center + half_width),
        );
        let r = 0.5 * (5.0_f64.sqrt() - 1.0);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let mut fc = self.susceptibility_dfdt(c)?.abs();
        let mut fd = self.susceptibility_dfdt(d)?.abs();
        while b - a > 1e-5 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = self.susceptibility_dfdt(c)?.abs();
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = self.susceptibility_dfdt(d)?.abs();
            }
        }
        let t = 0.5 * (a + b);
        let signed = self.susceptibility_dfdt(t)?;
        let (temperature, signed) = if signed.abs() >= best.1 {
            (t, signed)
        } else {
            (best.0, self.susceptibility_dfdt(best.0)?)
        };
        Ok(SusceptibilityPeak {
            temperature,
            magnitude: signed.abs(),
            signed,
        })
    }

    /// Rescale the particle so that max |df₋/dT| equals `target` (MHz/K) at `t_peak`.
    ///
    /// `t_curie` moves the peak; `field_coupling` is scaled with it so the
    /// reduced coupling c/T_C is preserved. The peak height is set by
    /// rescaling `m_sat`. A model that already meets both conditions is
    /// returned unchanged.
    pub fn calibrate_transducer(&self, target: f64, t_peak: f64) -> Result<HybridSensor> {
        if !(target > 0.0) {
            return Err(invalid("target_dfdT", "must be > 0"));
        }
        if !(t_peak > 0.0) {
            return Err(invalid("T_peak", "must be > 0"));
        }
        self.validate()?;
        let original_m_sat = self.mnp.m_sat;
        let mut sensor = self.clone();
        if sensor.mnp.m_sat == 0.0 {
            return Err(Error::CalibrationUnreachable {
                target,
                achieved: self.nv.dd_dt.abs(),
            });
        }

        let mut peak = sensor.peak_susceptibility(t_peak, SEARCH_HALF_WIDTH_K)?;
        if (peak.temperature - t_peak).abs() > 5.0 {
            sensor.relocate_by_reduced_peak(t_peak)?;
            peak = sensor.peak_susceptibility(t_peak, SEARCH_HALF_WIDTH_K)?;
        }
        for _ in 0..CALIBRATION_MAX_ITER {
            let location_ok = (peak.temperature - t_peak).abs() <= LOCATION_TOL_K;
            let value_ok = (peak.magnitude - target).abs() <= VALUE_TOL * target;
            if location_ok && value_ok {
                return Ok(sensor);
            }
            if !location_ok {
                let ratio = t_peak / peak.temperature;
                sensor.mnp.t_curie *= ratio;
                sensor.mnp.field_coupling *= ratio;
            } else {
                // df₋/dT is affine in m_sat at fixed geometry; solve for the
                // scale using the particle-free slope as the intercept.
                let mut bare = sensor.clone();
                bare.mnp.m_sat = 0.0;
                let intercept = bare.susceptibility_dfdt(peak.temperature)?;
                let wanted = target * peak.signed.signum();
                let scale = (wanted - intercept) / (peak.signed - intercept);
                let new_m_sat = sensor.mnp.m_sat * scale;
                let overall = new_m_sat / original_m_sat;
                if !(scale.is_finite() && scale > 0.0)
                    || !(overall > 1.0 / MAX_MOMENT_SCALE && overall < MAX_MOMENT_SCALE)
                {
                    return Err(Error::CalibrationUnreachable {
                        target,
                        achieved: peak.magnitude,
                    });
                }
                sensor.mnp.m_sat = new_m_sat;
            }
            peak = sensor
                .peak_susceptibility(t_peak, SEARCH_HALF_WIDTH_K)
                .map_err(|_| Error::CalibrationUnreachable {
                    target,
                    achieved: peak.magnitude,
                })?;
        }
        Err(Error::CalibrationUnreachable {
            target,
            achieved: peak.magnitude,
        })
    }

    /// Coarse relocation of the Curie point using the reduced-unit peak of
    /// |dm/dt|, which depends only on the reduced field c·|B|/T_C.
    fn relocate_by_reduced_peak(&mut self, t_peak: f64) -> Result<()> {
        let b = self.b_ext.norm();
        let reduced = MnpModel {
            t_curie: 1.0,
            field_coupling: self.mnp.field_coupling / self.mnp.t_curie,
            ..self.mnp.clone()
        };
        let t_star = if b == 0.0 {
            1.0
        } else {
            let slope = |t: f64| -> Result<f64> {
                let h = 1e-5;
                Ok((solve_magnetization(t - h, b, &reduced)?.m
                    - solve_magnetization(t + h, b, &reduced)?.m)
                    / (2.0 * h))
            };
            let mut best = (0.5, f64::NEG_INFINITY);
            for i in 0..=2000 {
                let t = 0.5 + i as f64 * 5e-4;
                let v = slope(t)?;
                if v > best.1 {
                    best = (t, v);
                }
            }
            best.0
        };
        let ratio = t_peak / (t_star * self.mnp.t_curie);
        self.mnp.t_curie *= ratio;
        self.mnp.field_coupling *= ratio;
        Ok(())
    }
}

const SEARCH_HALF_WIDTH_K: f64 = 15.0;
const LOCATION_TOL_K: f64 = 0.01;
const VALUE_TOL: f64 = 1e-10;
const CALIBRATION_MAX_ITER: usize = 60;
const MAX_MOMENT_SCALE: f64 = 1e9;
