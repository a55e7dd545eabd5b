//! NV-center ground-state spin model.
//!
//! The Hamiltonian is written in the NV frame with the symmetry axis as the
//! quantization axis: `H = D·Sz² + γe·B·S`, basis order `{|+1⟩, |0⟩, |−1⟩}`.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{invalid, Error, Result};
use crate::Vec3;

/// Minimum separation between the ms=0-like level and any other level for
/// transitions to be labeled.
pub const LABEL_GAP_MHZ: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NvParams {
    /// Zero-field splitting at `t0` (MHz).
    pub d_zfs0: f64,
    /// Reference temperature for `d_zfs0` (K).
    pub t0: f64,
    /// Linear temperature coefficient of D (MHz/K).
    pub dd_dt: f64,
    /// Electron gyromagnetic ratio (MHz/G).
    pub gamma_e: f64,
    /// NV symmetry axis, unit norm.
    pub axis: Vec3,
    /// Inhomogeneous dephasing time (µs).
    pub t2_star: f64,
    /// Readout contrast C.
    pub contrast: f64,
    /// Stretched-exponential decay exponent of the FID envelope.
    pub nu: f64,
    /// Hyperfine doublet splitting of each electronic line (MHz); 0 disables.
    pub hyperfine_split: f64,
    /// ODMR Lorentzian FWHM (MHz).
    pub linewidth: f64,
}

impl Default for NvParams {
    fn default() -> Self {
        Self {
            d_zfs0: 2870.0,
            t0: 298.0,
            dd_dt: -0.074,
            gamma_e: 2.8,
            axis: Vec3::z(),
            t2_star: 1.5,
            contrast: 0.27,
            nu: 3.3,
            hyperfine_split: 3.0,
            linewidth: 0.6,
        }
    }
}

impl NvParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_zfs0 > 0.0) {
            return Err(invalid("d_zfs0", "must be > 0"));
        }
        if !(self.gamma_e > 0.0) {
            return Err(invalid("gamma_e", "must be > 0"));
        }
        if !(self.contrast > 0.0 && self.contrast < 1.0) {
            return Err(invalid("contrast", "must lie in (0, 1)"));
        }
        if !(self.t2_star > 0.0) {
            return Err(invalid("t2_star", "must be > 0"));
        }
        if !(self.nu > 0.0) {
            return Err(invalid("nu", "must be > 0"));
        }
        if !(self.linewidth > 0.0) {
            return Err(invalid("linewidth", "must be > 0"));
        }
        if !(self.hyperfine_split >= 0.0) {
            return Err(invalid("hyperfine_split", "must be >= 0"));
        }
        if !self.t0.is_finite() || !self.dd_dt.is_finite() {
            return Err(invalid("t0/dd_dt", "must be finite"));
        }
        if (self.axis.norm() - 1.0).abs() > 1e-12 {
            return Err(invalid("axis", "must be unit norm"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionPair {
    pub f_minus: f64,
    pub f_plus: f64,
}

pub fn d_of_temperature(t: f64, nv: &NvParams) -> f64 {
    nv.d_zfs0 + nv.dd_dt * (t - nv.t0)
}

/// Orthonormal frame `(u, v, axis)` attached to the NV axis.
pub fn nv_frame(axis: &Vec3) -> (Vec3, Vec3) {
    let reference = if axis.x.abs() < 0.9 {
        Vec3::x()
    } else {
        Vec3::y()
    };
    let u = (reference - axis * reference.dot(axis)).normalize();
    let v = axis.cross(&u);
    (u, v)
}

/// Field components `(Bx, By, Bz)` in the NV frame.
pub fn field_in_nv_frame(b: &Vec3, nv: &NvParams) -> Vector3<f64> {
    let (u, v) = nv_frame(&nv.axis);
    Vector3::new(b.dot(&u), b.dot(&v), b.dot(&nv.axis))
}

pub fn hamiltonian(d: f64, b: &Vec3, nv: &NvParams) -> Matrix3<Complex64> {
    let bf = field_in_nv_frame(b, nv);
    let g = nv.gamma_e;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let s = FRAC_1_SQRT_2 * g;
    // g·(Bx·Sx + By·Sy) couples neighbouring ms levels through B± = Bx ∓ i·By.
    let off = c(s * bf.x, -s * bf.y);
    let zero = c(0.0, 0.0);
    Matrix3::new(
        c(d + g * bf.z, 0.0),
        off,
        zero,
        off.conj(),
        zero,
        off,
        zero,
        off.conj(),
        c(d - g * bf.z, 0.0),
    )
}

/// Eigenvalues in ascending order with matching eigenvectors (as columns).
pub fn eigensystem(h: &Matrix3<Complex64>) -> ([f64; 3], Matrix3<Complex64>) {
    let eig = SymmetricEigen::new(*h);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.map(|i| eig.eigenvalues[i]);
    let mut vectors = Matrix3::zeros();
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Transition frequencies out of the ms=0-like level.
///
/// The reference level is the eigenstate with the largest `|0⟩` weight, which
/// continues adiabatically from the axial limit. Below the ground-state level
/// anticrossing this reduces to `e1 − e0` and `e2 − e0`.
pub fn transition_frequencies(d: f64, b: &Vec3, nv: &NvParams) -> Result<TransitionPair> {
    let h = hamiltonian(d, b, nv);
    let (values, vectors) = eigensystem(&h);
    let weights: [f64; 3] = [0, 1, 2].map(|k| vectors[(1, k)].norm_sqr());
    let mut zero_like = 0;
    for k in 1..3 {
        if weights[k] > weights[zero_like] {
            zero_like = k;
        }
    }
    let others: Vec<usize> = (0..3).filter(|&k| k != zero_like).collect();
    let gap = others
        .iter()
        .map(|&k| (values[k] - values[zero_like]).abs())
        .fold(f64::INFINITY, f64::min);
    if !(gap > LABEL_GAP_MHZ) {
        return Err(Error::AmbiguousLabeling { gap });
    }
    let a = (values[others[0]] - values[zero_like]).abs();
    let b = (values[others[1]] - values[zero_like]).abs();
    Ok(TransitionPair {
        f_minus: a.min(b),
        f_plus: a.max(b),
    })
}

/// Peak-normalized Lorentzian with full width at half maximum `fwhm`.
pub fn lorentzian(f: f64, center: f64, fwhm: f64) -> f64 {
    let hw = 0.5 * fwhm;
    hw * hw / ((f - center).powi(2) + hw * hw)
}

/// Normalized photoluminescence for a set of resonance lines.
///
/// Every line is a Lorentzian dip of depth `contrast` (split into a symmetric
/// doublet of half depth when hyperfine splitting is enabled).
pub fn odmr_spectrum(f_grid: &[f64], lines: &[f64], nv: &NvParams) -> Vec<f64> {
    let hf = nv.hyperfine_split;
    let components: Vec<f64> = if hf > 0.0 {
        lines
            .iter()
            .flat_map(|&l| [l - 0.5 * hf, l + 0.5 * hf])
            .collect()
    } else {
        lines.to_vec()
    };
    let weight = if hf > 0.0 {
        nv.contrast / 2.0
    } else {
        nv.contrast
    };
    f_grid
        .iter()
        .map(|&f| {
            let dip: f64 = components
                .iter()
                .map(|&c| lorentzian(f, c, nv.linewidth))
                .sum();
            1.0 - weight * dip
        })
        .collect()
}

/// FID envelope `exp[−(t/T2*)^ν]`.
pub fn fid_envelope(t: f64, nv: &NvParams) -> f64 {
    (-(t / nv.t2_star).powf(nv.nu)).exp()
}

/// Normalized photon count after a Ramsey sequence with free evolution `t` (µs)
/// and detuning `delta_f` (MHz).
pub fn fid_signal(t: f64, delta_f: f64, nv: &NvParams) -> f64 {
    let half = 0.5 * nv.contrast;
    1.0 - half + half * (2.0 * PI * delta_f * t).cos() * fid_envelope(t, nv)
}

/// Analytic derivative of [`fid_signal`] with respect to the detuning (1/MHz).
pub fn fid_responsivity(t: f64, delta_f: f64, nv: &NvParams) -> f64 {
    let half = 0.5 * nv.contrast;
    -half * 2.0 * PI * t * (2.0 * PI * delta_f * t).sin() * fid_envelope(t, nv)
}
