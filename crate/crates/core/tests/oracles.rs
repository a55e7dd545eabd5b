use nvtherm_core::magnet::{solve_magnetization, MnpModel};
use nvtherm_core::nvspin::{transition_frequencies, NvParams};
use nvtherm_core::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Coefficients (ascending powers) of det(H − λ) for D·Sz² + γ(Bz·Sz + B⊥·Sx).
fn characteristic(d: f64, bz: f64, bt: f64) -> [f64; 4] {
    let mul = |p: &[f64], q: &[f64]| -> Vec<f64> {
        let mut r = vec![0.0; p.len() + q.len() - 1];
        for (i, a) in p.iter().enumerate() {
            for (j, b) in q.iter().enumerate() {
                r[i + j] += a * b;
            }
        }
        r
    };
    let hp = [d + bz, -1.0];
    let hm = [d - bz, -1.0];
    let h0 = [0.0, -1.0];
    let half = 0.5 * bt * bt;
    let diag = mul(&mul(&hp, &h0), &hm);
    let mut c = [0.0; 4];
    for (k, v) in diag.iter().enumerate() {
        c[k] += v;
    }
    for lin in [hp, hm] {
        c[0] -= half * lin[0];
        c[1] -= half * lin[1];
    }
    c
}

/// Real roots of a cubic with three real roots, ascending, Newton-polished.
fn cubic_roots(c: [f64; 4]) -> [f64; 3] {
    let (a, b, cc) = (c[2] / c[3], c[1] / c[3], c[0] / c[3]);
    let p = b - a * a / 3.0;
    let q = 2.0 * a.powi(3) / 27.0 - a * b / 3.0 + cc;
    let r = (-p / 3.0).sqrt();
    let arg = (3.0 * q / (2.0 * p * r)).clamp(-1.0, 1.0);
    let phi = arg.acos() / 3.0;
    let mut roots = [0, 1, 2].map(|k| {
        2.0 * r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - a / 3.0
    });
    for x in roots.iter_mut() {
        for _ in 0..3 {
            let f = ((c[3] * *x + c[2]) * *x + c[1]) * *x + c[0];
            let df = (3.0 * c[3] * *x + 2.0 * c[2]) * *x + c[1];
            if df != 0.0 {
                *x -= f / df;
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

#[test]
fn transitions_match_the_characteristic_polynomial() {
    let nv = NvParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let d = rng.random_range(2800.0..2950.0);
        let mag = rng.random_range(0.0..300.0);
        let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let phi: f64 = rng.random_range(0.0..2.0 * std::f64::consts::PI);
        let b = Vec3::new(
            mag * theta.sin() * phi.cos(),
            mag * theta.sin() * phi.sin(),
            mag * theta.cos(),
        );
        let got = transition_frequencies(d, &b, &nv).unwrap();
        let bt = (b.x * b.x + b.y * b.y).sqrt() * nv.gamma_e;
        let r = cubic_roots(characteristic(d, b.z * nv.gamma_e, bt));
        let (fm, fp) = (r[1] - r[0], r[2] - r[0]);
        worst = worst
            .max((got.f_minus - fm).abs() / fm)
            .max((got.f_plus - fp).abs() / fp);
    }
    assert!(worst < 1e-8, "worst relative error {worst:e}");
}

#[test]
fn axial_fields_split_symmetrically_about_d() {
    let nv = NvParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10_000 {
        let d = rng.random_range(2800.0..2950.0);
        let bz = rng.random_range(0.0..800.0);
        let got = transition_frequencies(d, &Vec3::new(0.0, 0.0, bz), &nv).unwrap();
        let (fm, fp) = (d - nv.gamma_e * bz, d + nv.gamma_e * bz);
        assert!((got.f_minus - fm).abs() <= 1e-9 * fm, "{got:?} vs {fm}");
        assert!((got.f_plus - fp).abs() <= 1e-9 * fp, "{got:?} vs {fp}");
    }
}

#[test]
fn magnetization_satisfies_the_mean_field_equation() {
    let model = MnpModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10_000 {
        let t = rng.random_range(1.0..2.0 * model.t_curie);
        let b = rng.random_range(0.0..1e4);
        let m = solve_magnetization(t, b, &model).unwrap().m;
        let r = m - ((model.t_curie * m + model.field_coupling * b) / t).tanh();
        assert!(r.abs() < 1e-10, "T={t} B={b} m={m} r={r:e}");
    }
}

#[test]
fn magnetization_never_rises_with_temperature() {
    let model = MnpModel::default();
    for b in [1.0, 10.0, 100.0, 192.0, 1000.0] {
        let mut prev = f64::INFINITY;
        for k in 0..=4000 {
            let t = 200.0 + 0.05 * k as f64;
            let m = solve_magnetization(t, b, &model).unwrap().m;
            assert!(m <= prev, "B={b} T={t}: {m} > {prev}");
            prev = m;
        }
    }
}

#[test]
fn zero_field_magnetization_vanishes_at_and_above_curie() {
    let model = MnpModel::default();
    for k in 0..1000 {
        let t = model.t_curie + 0.1 * k as f64;
        assert_eq!(solve_magnetization(t, 0.0, &model).unwrap().m, 0.0);
    }
}
