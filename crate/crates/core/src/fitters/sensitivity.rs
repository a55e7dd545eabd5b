use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

use std::f64::consts::PI;

const SCAN_POINTS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityInputs {
    pub contrast: f64,
    pub t2_star_us: f64,
    pub nu: f64,
    pub delta_f_mhz: f64,
    /// 1/s.
    pub l_eff: f64,
    /// MHz/K.
    pub dfdt_mhz_per_k: f64,
}

impl SensitivityInputs {
    pub fn reference_working_point() -> Self {
        Self {
            contrast: 0.27,
            t2_star_us: 1.8,
            nu: 3.3,
            delta_f_mhz: 2.7,
            l_eff: 9.6e4,
            dfdt_mhz_per_k: 47.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    /// K/√Hz, with the phase factor optimized jointly with the envelope.
    pub eta_t: f64,
    pub t_optimal_us: f64,
    /// 1/MHz.
    pub ds_df_max: f64,
    /// K/√Hz with |sin| held at one.
    pub eta_t_envelope: f64,
    pub t_envelope_us: f64,
    pub ds_df_envelope: f64,
    pub inputs: SensitivityInputs,
}

fn envelope(t: f64, t2: f64, nu: f64) -> f64 {
    (-(t / t2).powf(nu)).exp()
}

/// |dS/dδf| divided by 2π·δf, finite as δf → 0.
fn scaled_objective(t: f64, t2: f64, nu: f64, df: f64) -> f64 {
    let x = 2.0 * PI * df * t;
    let sinc = if x.abs() < 1e-8 { 1.0 - x * x / 6.0 } else { x.sin() / x };
    t * t * sinc.abs() * envelope(t, t2, nu)
}

/// Argmax of |∂S/∂δf| over (0, 5·T2*] in µs.
pub fn optimal_wait(contrast: f64, t2_star: f64, nu: f64, delta_f: f64) -> Result<f64> {
    if !(contrast > 0.0) || !(t2_star > 0.0) || !(nu > 0.0) || !(delta_f >= 0.0) {
        return Err(invalid("optimal_wait", "inputs must be positive"));
    }
    let g = |t: f64| scaled_objective(t, t2_star, nu, delta_f);
    let hi = 5.0 * t2_star;
    let dt = hi / SCAN_POINTS as f64;
    let mut best = (1usize, f64::NEG_INFINITY);
    for i in 1..=SCAN_POINTS {
        let v = g(dt * i as f64);
        if v > best.1 {
            best = (i, v);
        }
    }
    let (mut a, mut b) = (dt * (best.0 as f64 - 1.0), (dt * (best.0 as f64 + 1.0)).min(hi));
    let r = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    while b - a > 1e-12 * hi {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = g(d);
        }
    }
    let t = 0.5 * (a + b);
    Ok(if g(t) >= best.1 { t } else { dt * best.0 as f64 })
}

/// η_T = 1 / (√L_eff · |df/dT| · |dS/df|max).
pub fn estimate_sensitivity(inputs: &SensitivityInputs) -> Result<SensitivityReport> {
    let SensitivityInputs {
        contrast,
        t2_star_us,
        nu,
        delta_f_mhz,
        l_eff,
        dfdt_mhz_per_k,
    } = *inputs;
    for (name, v) in [
        ("contrast", contrast),
        ("t2_star", t2_star_us),
        ("nu", nu),
        ("delta_f", delta_f_mhz),
        ("l_eff", l_eff),
        ("dfdt", dfdt_mhz_per_k.abs()),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(invalid(name, "must be positive"));
        }
    }
    let t_opt = optimal_wait(contrast, t2_star_us, nu, delta_f_mhz)?;
    let ds_df_max = 0.5 * contrast * 2.0 * PI * t_opt
        * (2.0 * PI * delta_f_mhz * t_opt).sin().abs()
        * envelope(t_opt, t2_star_us, nu);
    let t_env = t2_star_us * nu.powf(-1.0 / nu);
    let ds_df_envelope = 0.5 * contrast * 2.0 * PI * t_env * envelope(t_env, t2_star_us, nu);
    let eta = |ds: f64| 1.0 / (l_eff.sqrt() * dfdt_mhz_per_k.abs() * ds);
    Ok(SensitivityReport {
        eta_t: eta(ds_df_max),
        t_optimal_us: t_opt,
        ds_df_max,
        eta_t_envelope: eta(ds_df_envelope),
        t_envelope_us: t_env,
        ds_df_envelope,
        inputs: *inputs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_working_point() {
        let r = estimate_sensitivity(&SensitivityInputs::reference_working_point()).unwrap();
        let eta_uk = r.eta_t * 1e6;
        assert!((70.0..=95.0).contains(&eta_uk), "{eta_uk}");
        assert!((0.9..=1.3).contains(&r.t_optimal_us));
        assert!((r.t_envelope_us - 1.2535656084904907).abs() < 1e-12);
    }

    #[test]
    fn brute_force_grid_agrees() {
        let (c, t2, nu, df) = (0.27, 1.8, 3.3, 2.7);
        let t = optimal_wait(c, t2, nu, df).unwrap();
        let n = 1_000_000;
        let hi = 5.0 * t2;
        let mut best = (0.0, f64::NEG_INFINITY);
        for i in 1..=n {
            let x = hi * i as f64 / n as f64;
            let v = x * (2.0 * PI * df * x).sin().abs() * (-(x / t2).powf(nu)).exp();
            if v > best.1 {
                best = (x, v);
            }
        }
        assert!((t - best.0).abs() < 1e-4, "{t} vs {}", best.0);
    }

    #[test]
    fn zero_detuning_limit_is_finite() {
        let t = optimal_wait(0.27, 1.8, 3.3, 0.0).unwrap();
        let expected = 1.8 * (2.0_f64 / 3.3).powf(1.0 / 3.3);
        assert!((t - expected).abs() < 1e-6);
        let tiny = optimal_wait(0.27, 1.8, 3.3, 1e-9).unwrap();
        assert!((tiny - t).abs() < 1e-6);
    }

    #[test]
    fn doubling_rate_divides_by_sqrt_two() {
        let base = SensitivityInputs::reference_working_point();
        let a = estimate_sensitivity(&base).unwrap();
        let b = estimate_sensitivity(&SensitivityInputs {
            l_eff: 2.0 * base.l_eff,
            ..base
        })
        .unwrap();
        assert!((a.eta_t / b.eta_t - 2.0_f64.sqrt()).abs() < 1e-12);
    }
}
