//! One PASS/FAIL line per acceptance criterion; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nvtherm_cli::{run_experiment, Config, Experiment};
use nvtherm_core::fitters::{
    calibrate_temperature, estimate_sensitivity, fit_exponential, fit_fid, fit_lorentzian_multi, FidFitOptions,
    LorentzianFitOptions, SensitivityInputs,
};
use nvtherm_core::magnet::{solve_magnetization, MnpModel};
use nvtherm_core::nvspin::{fid_signal, odmr_spectrum, transition_frequencies, NvParams};
use nvtherm_core::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo && x <= hi
}

fn rel(x: f64, truth: f64) -> f64 {
    ((x - truth) / truth).abs()
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn num(v: &serde_json::Value, path: &[&str]) -> f64 {
    path.iter().fold(v, |v, k| &v[*k]).as_f64().unwrap_or(f64::NAN)
}

fn run(exp: Experiment, config: &Config) -> (serde_json::Value, Duration, TempDir) {
    let dir = TempDir::new().unwrap();
    let (r, elapsed) = timed(|| run_experiment(exp, config, dir.path()));
    r.unwrap_or_else(|e| panic!("{}: {e}", exp.name()));
    let summary = match exp {
        Experiment::Demag => "demag_summary.json",
        Experiment::Track => "track_summary.json",
        Experiment::Cooling => "cooling_fit.json",
        Experiment::Heater => "heater_summary.json",
        Experiment::Sensitivity => "sensitivity.json",
        Experiment::Fid => "fid_fit.json",
        _ => unreachable!(),
    };
    (read_json(&dir.path().join(summary)), elapsed, dir)
}

fn sensitivity_formula() -> Outcome {
    let (report, elapsed) = timed(|| estimate_sensitivity(&SensitivityInputs::reference_working_point()).unwrap());
    let joint = report.eta_t * 1e6;
    let envelope = report.eta_t_envelope * 1e6;
    outcome(
        within(joint, 70.0, 95.0) && within(envelope, 70.0, 95.0) && elapsed < Duration::from_secs(1),
        format!("eta {joint:.2} (envelope {envelope:.2}) uK/rtHz in [70, 95], {elapsed:.2?} < 1 s"),
    )
}

fn susceptibility_enhancement() -> Outcome {
    let (s, elapsed, _dir) = run(Experiment::Demag, &Config::default());
    let ratio = num(&s, &["enhancement_over_dd_dt"]);
    outcome(
        within(ratio, 550.0, 700.0) && elapsed < Duration::from_secs(10),
        format!(
            "|df/dT|max/|dD/dT| = {ratio:.1} in [550, 700] at {:.3} K, {elapsed:.2?} < 10 s",
            num(&s, &["peak_temperature_k"])
        ),
    )
}

fn shot_noise_scaling() -> Outcome {
    let mut config = Config::default();
    config.track.duration_s = 60.0;
    let (s, elapsed, _dir) = run(Experiment::Track, &config);
    let slope = num(&s, &["integration_slope"]);
    let eta = num(&s, &["eta_uk_per_sqrt_hz"]);
    outcome(
        (slope + 0.5).abs() <= 0.05 && within(eta, 70.0, 110.0) && elapsed < Duration::from_secs(300),
        format!("60 s track: slope {slope:.3} = -0.5 +/- 0.05, eta {eta:.1} uK/rtHz in [70, 110], {elapsed:.2?} < 5 min"),
    )
}

fn histogram() -> Outcome {
    let (s, _, _dir) = run(Experiment::Track, &Config::default());
    let n = num(&s, &["samples"]);
    let sigma = num(&s, &["gaussian_sigma_mk"]);
    let p = num(&s, &["shapiro_p"]);
    outcome(
        n >= 6000.0 && within(sigma, 1.0, 2.0) && p > 0.01,
        format!("{n} samples: Gaussian sigma {sigma:.3} mK in [1, 2], Shapiro-Wilk p {p:.3} > 0.01"),
    )
}

fn cooling_curve() -> Outcome {
    let (s, _, _dir) = run(Experiment::Cooling, &Config::default());
    let a = num(&s, &["amplitude_mk"]);
    let recovery = num(&s, &["recovery_3tau_us"]);
    outcome(
        rel(a, 20.0) <= 0.15 && rel(recovery, 1.5) <= 0.15,
        format!("amplitude {a:.2} mK = 20 +/- 15%, 3tau {recovery:.3} us = 1.5 +/- 15%"),
    )
}

fn heater() -> Outcome {
    let (s, _, _dir) = run(Experiment::Heater, &Config::default());
    let a = num(&s, &["chopped", "step_amplitude_mk"]);
    let tau = num(&s, &["chopped", "step_tau_s"]);
    let drift = num(&s, &["polarity_control", "max_abs_drift_mk"]);
    outcome(
        rel(a, 10.0) <= 0.15 && rel(tau, 1.0) <= 0.15 && drift < 1.0,
        format!("dT {a:.2} mK = 10 +/- 15%, tau {tau:.3} s = 1 +/- 15%, reversal drift {drift:.3} mK < 1"),
    )
}

/// Coefficients (ascending) of det(H − λ) for D·Sz² + γ(Bz·Sz + B⊥·Sx).
fn characteristic(d: f64, bz: f64, bt: f64) -> [f64; 4] {
    let half = 0.5 * bt * bt;
    let (p, m) = (d + bz, d - bz);
    // −λ(p − λ)(m − λ) + half·λ·2 − half·(p + m)
    [-half * (p + m), -p * m + 2.0 * half, p + m, -1.0]
}

fn cubic_roots(c: [f64; 4]) -> [f64; 3] {
    let (a, b, cc) = (c[2] / c[3], c[1] / c[3], c[0] / c[3]);
    let p = b - a * a / 3.0;
    let q = 2.0 * a.powi(3) / 27.0 - a * b / 3.0 + cc;
    let r = (-p / 3.0).sqrt();
    let phi = (3.0 * q / (2.0 * p * r)).clamp(-1.0, 1.0).acos() / 3.0;
    let mut roots = [0, 1, 2].map(|k| 2.0 * r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - a / 3.0);
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

fn eigen_oracle() -> Outcome {
    let nv = NvParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0007);
    let mut general: f64 = 0.0;
    let mut axial: f64 = 0.0;
    for _ in 0..10_000 {
        let d = rng.random_range(2800.0..2950.0);
        let mag = rng.random_range(0.0..300.0);
        let theta: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let phi: f64 = rng.random_range(0.0..2.0 * std::f64::consts::PI);
        let b = Vec3::new(mag * theta.sin() * phi.cos(), mag * theta.sin() * phi.sin(), mag * theta.cos());
        let got = transition_frequencies(d, &b, &nv).unwrap();
        let bt = (b.x * b.x + b.y * b.y).sqrt() * nv.gamma_e;
        let r = cubic_roots(characteristic(d, b.z * nv.gamma_e, bt));
        general = general.max(rel(got.f_minus, r[1] - r[0])).max(rel(got.f_plus, r[2] - r[0]));

        let bz = rng.random_range(0.0..800.0);
        let got = transition_frequencies(d, &Vec3::new(0.0, 0.0, bz), &nv).unwrap();
        axial = axial
            .max(rel(got.f_minus, d - nv.gamma_e * bz))
            .max(rel(got.f_plus, d + nv.gamma_e * bz));
    }
    outcome(
        general <= 1e-8 && axial <= 1e-9,
        format!("1e4 draws: worst {general:.1e} <= 1e-8 vs cubic, axial {axial:.1e} <= 1e-9"),
    )
}

fn magnetization() -> Outcome {
    let model = MnpModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0008);
    let mut residual: f64 = 0.0;
    for _ in 0..10_000 {
        let t = rng.random_range(1.0..2.0 * model.t_curie);
        let b = rng.random_range(0.0..1e4);
        let m = solve_magnetization(t, b, &model).unwrap().m;
        residual = residual.max((m - ((model.t_curie * m + model.field_coupling * b) / t).tanh()).abs());
    }
    let mut monotone = true;
    for b in [1.0, 10.0, 192.0, 1000.0] {
        let mut prev = f64::INFINITY;
        for k in 0..=4000 {
            let m = solve_magnetization(200.0 + 0.05 * k as f64, b, &model).unwrap().m;
            monotone &= m <= prev;
            prev = m;
        }
    }
    let zero = (0..1000).all(|k| solve_magnetization(model.t_curie + 0.1 * k as f64, 0.0, &model).unwrap().m == 0.0);
    outcome(
        residual < 1e-10 && monotone && zero,
        format!("residual {residual:.1e} < 1e-10, monotone in T: {monotone}, m = 0 above Tc: {zero}"),
    )
}

fn fit_round_trips() -> Outcome {
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();

    let nv = NvParams::default();
    let f: Vec<f64> = (0..=400).map(|k| 2860.0 + 0.05 * k as f64).collect();
    let s = odmr_spectrum(&f, &[2870.3], &nv);
    let opts = LorentzianFitOptions {
        n_dips: 1,
        hyperfine_split: Some(nv.hyperfine_split),
        linewidth: nv.linewidth,
    };
    let fit = fit_lorentzian_multi(&f, &s, &opts).unwrap();
    worst.insert("lorentzian", rel(fit.centers()[0], 2870.3).max(rel(fit.get("depth_0").unwrap(), nv.contrast)));

    let t: Vec<f64> = (0..=200).map(|k| 0.025 * k as f64).collect();
    let fid_nv = NvParams {
        contrast: 0.27,
        t2_star: 1.8,
        nu: 3.3,
        ..NvParams::default()
    };
    let s: Vec<f64> = t.iter().map(|&x| fid_signal(x, 2.7, &fid_nv)).collect();
    let fit = fit_fid(&t, &s, &FidFitOptions::default()).unwrap();
    let fid_err = [("C", 0.27), ("delta_f", 2.7), ("t2_star", 1.8), ("nu", 3.3)]
        .iter()
        .map(|&(k, v)| rel(fit.get(k).unwrap(), v))
        .fold(0.0, f64::max);
    worst.insert("fid", fid_err);

    let t: Vec<f64> = (0..60).map(|i| i as f64 * 0.05).collect();
    let y: Vec<f64> = t.iter().map(|&x| 20.0 * (-x / 0.5).exp() + 0.3).collect();
    let fit = fit_exponential(&t, &y).unwrap();
    let exp_err = [("amplitude", 20.0), ("tau", 0.5), ("offset", 0.3)]
        .iter()
        .map(|&(k, v)| rel(fit.get(k).unwrap(), v))
        .fold(0.0, f64::max);
    worst.insert("exponential", exp_err);

    let truth: Vec<(f64, f64)> = (0..9).map(|k| (k as f64, 298.0 + 0.5 * (k * k) as f64)).collect();
    let points: Vec<(f64, f64)> = truth
        .iter()
        .map(|&(s, t)| (s, nv.d_zfs0 + nv.dd_dt * (t - nv.t0)))
        .collect();
    let cal = calibrate_temperature(&points, &nv).unwrap();
    let cal_err = truth
        .iter()
        .map(|&(s, t)| rel(cal.temperature_at(s), t))
        .fold(0.0, f64::max);
    worst.insert("calibration", cal_err);

    let (s, _, _dir) = run(Experiment::Fid, &Config::default());
    let noisy = [("C", 0.27), ("delta_f", 2.7), ("t2_star", 1.8), ("nu", 3.3)]
        .iter()
        .map(|&(k, v)| {
            let p = s["fit"]["params"].as_array().unwrap().iter().find(|p| p["name"] == k).unwrap();
            rel(p["value"].as_f64().unwrap(), v)
        })
        .fold(0.0, f64::max);

    let zero_ok = worst.values().all(|&e| e <= 1e-6);
    let listed: Vec<String> = worst.iter().map(|(k, v)| format!("{k} {v:.1e}")).collect();
    outcome(
        zero_ok && noisy <= 0.05,
        format!("zero-noise {} <= 1e-6; noisy FID worst {:.2}% <= 5%", listed.join(", "), noisy * 100.0),
    )
}

fn run_binary(exp: Experiment, out: &Path, threads: &str) -> bool {
    Command::new(env!("CARGO_BIN_EXE_nvtherm"))
        .env_remove("NVTHERM_OUT_DIR")
        .env("RAYON_NUM_THREADS", threads)
        .args(["--out", out.to_str().unwrap(), exp.name()])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.to_string_lossy().ends_with("_manifest.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

fn determinism() -> Outcome {
    let mut mismatched = Vec::new();
    let mut compared = 0;
    for exp in Experiment::ALL {
        let a = TempDir::new().unwrap();
        let b = TempDir::new().unwrap();
        if !(run_binary(exp, a.path(), "1") && run_binary(exp, b.path(), "4")) {
            mismatched.push(format!("{} (failed to run)", exp.name()));
            continue;
        }
        let (fa, fb) = (files(a.path()), files(b.path()));
        compared += fa.len();
        if fa.is_empty() || fa != fb {
            mismatched.push(exp.name().to_string());
        }
        let manifest = |d: &TempDir| {
            let mut m = read_json(&d.path().join(format!("{}_manifest.json", exp.name())));
            m["started_unix_s"] = serde_json::Value::Null;
            m["finished_unix_s"] = serde_json::Value::Null;
            m
        };
        if manifest(&a) != manifest(&b) {
            mismatched.push(format!("{} manifest", exp.name()));
        }
    }
    outcome(
        mismatched.is_empty(),
        format!(
            "{} subcommands, {compared} output files identical with 1 and 4 threads{}",
            Experiment::ALL.len(),
            if mismatched.is_empty() { String::new() } else { format!("; differ: {}", mismatched.join(", ")) }
        ),
    )
}

fn main() {
    type Check = (&'static str, fn() -> Outcome);
    let criteria: [Check; 10] = [
        ("sensitivity formula", sensitivity_formula),
        ("susceptibility enhancement", susceptibility_enhancement),
        ("shot-noise scaling", shot_noise_scaling),
        ("tracker histogram", histogram),
        ("cooling curve", cooling_curve),
        ("heater experiment", heater),
        ("eigen-solver oracle", eigen_oracle),
        ("magnetization solver", magnetization),
        ("fit round trips", fit_round_trips),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
