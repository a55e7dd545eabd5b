use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nvtherm_cli::{run_experiment, Config, Experiment};
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nvtherm"));
    cmd.env_remove("NVTHERM_OUT_DIR");
    cmd
}

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap()
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn config_survives_a_dump_and_reload() {
    let original = Config::load(&scenarios().join("reference.toml")).unwrap();
    let dumped = original.to_toml().unwrap();
    let again = Config::from_toml(&dumped).unwrap();
    assert_eq!(original, again);
    assert_eq!(original.normalized().unwrap(), again.normalized().unwrap());
    assert_eq!(dumped, again.to_toml().unwrap());
}

#[test]
fn hash_ignores_key_order() {
    let a = Config::from_toml("[track]\nduration_s = 12.0\nsample_time_s = 0.01\n[scene]\nseed = 4\n").unwrap();
    let b = Config::from_toml("[scene]\nseed = 4\n[track]\nsample_time_s = 0.01\nduration_s = 12.0\n").unwrap();
    assert_eq!(a.hash().unwrap(), b.hash().unwrap());
    let c = Config::from_toml("[scene]\nseed = 5\n").unwrap();
    assert_ne!(a.hash().unwrap(), c.hash().unwrap());
}

#[test]
fn empty_file_is_the_default_scene() {
    assert_eq!(Config::from_toml("").unwrap(), Config::default());
}

#[test]
fn every_shipped_scenario_loads() {
    let mut n = 0;
    for entry in std::fs::read_dir(scenarios()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let config = Config::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            config.scene.build().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 4);
}

#[test]
fn unknown_key_exits_with_config_code() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[track]\nduraton_s = 3.0\n");
    let out = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "track"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duraton_s"));
}

#[test]
fn empty_temperature_grid_exits_with_config_code() {
    let dir = TempDir::new().unwrap();
    for body in ["[demag]\nt_step_k = 0.0\n", "[demag]\nt_min_k = 300.0\nt_max_k = 250.0\n"] {
        let cfg = write_config(dir.path(), body);
        let out = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "demag"]);
        assert_eq!(out.status.code(), Some(2), "{body}");
    }
}

#[test]
fn missing_config_exits_with_io_code() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.toml");
    let out = run(&["--config", missing.to_str().unwrap(), "demag"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn flat_fringe_exits_with_numerical_code() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[track]\nduration_s = 1.0\ntau_us = 1.0\ndelta_f_mhz = 0.5\n");
    let out = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "track"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn demag_magnetization_falls_with_temperature() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[demag]\nfield_g = 100.0\n");
    let out = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "demag"]);
    assert!(out.status.success());
    let (h, rows) = read_csv(&dir.path().join("demag.csv"));
    let m = column(&h, "m");
    assert!(rows.len() > 100);
    for w in rows.windows(2) {
        assert!(w[1][m] <= w[0][m]);
    }
    assert!(rows[0][m] > 0.5 && rows[rows.len() - 1][m] < 0.1);
}

#[test]
fn without_a_particle_the_splitting_ignores_temperature() {
    let dir = TempDir::new().unwrap();
    let mut config = Config::default();
    config.scene.mnp.m_sat = 0.0;
    config.scene.calibration = None;
    run_experiment(Experiment::Demag, &config, dir.path()).unwrap();
    let (h, rows) = read_csv(&dir.path().join("demag.csv"));
    let (fm, fp) = (column(&h, "f_minus_MHz"), column(&h, "f_plus_MHz"));
    let first = rows[0][fp] - rows[0][fm];
    for r in &rows {
        assert!(((r[fp] - r[fm]) - first).abs() < 1e-9);
    }
    assert!(rows.iter().all(|r| r[column(&h, "dfdT_MHz_per_K")].abs() < 0.1));
}

#[test]
fn same_seed_writes_the_same_spectrum() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let out = run(&["--seed", "42", "--shots", "20000", "--out", dir.path().to_str().unwrap(), "odmr"]);
        assert!(out.status.success());
    }
    let read = |d: &TempDir| std::fs::read(d.path().join("odmr.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let c = TempDir::new().unwrap();
    run(&["--seed", "43", "--shots", "20000", "--out", c.path().to_str().unwrap(), "odmr"]);
    assert_ne!(read(&a), read(&c));
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("from-env");
    let out = bin()
        .env("NVTHERM_OUT_DIR", &target)
        .current_dir(dir.path())
        .arg("sensitivity")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("sensitivity.json").exists());
    let manifest = read_json(&target.join("sensitivity_manifest.json"));
    assert_eq!(manifest["command"], "sensitivity");
    assert_eq!(manifest["config_hash"], Config::default().hash().unwrap());
}

#[test]
fn config_subcommand_prints_a_loadable_scenario() {
    let out = run(&["--seed", "9", "config"]);
    assert!(out.status.success());
    let config = Config::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(config.scene.seed, 9);
}

#[test]
fn sensitivity_lands_near_the_reference_device() {
    let dir = TempDir::new().unwrap();
    run_experiment(Experiment::Sensitivity, &Config::default(), dir.path()).unwrap();
    let eta = read_json(&dir.path().join("sensitivity.json"))["eta_t_uk_per_sqrt_hz"]
        .as_f64()
        .unwrap();
    assert!((70.0..=95.0).contains(&eta), "{eta}");
}

#[test]
fn tracker_noise_is_about_a_millikelvin() {
    let dir = TempDir::new().unwrap();
    run_experiment(Experiment::Track, &Config::default(), dir.path()).unwrap();
    let sigma = read_json(&dir.path().join("track_summary.json"))["sigma_mk"]
        .as_f64()
        .unwrap();
    assert!((1.0..=2.0).contains(&sigma), "{sigma}");
}

#[test]
fn polarity_reversal_leaves_temperature_flat() {
    let dir = TempDir::new().unwrap();
    run_experiment(Experiment::Heater, &Config::default(), dir.path()).unwrap();
    let drift = read_json(&dir.path().join("heater_summary.json"))["polarity_control"]["max_abs_drift_mk"]
        .as_f64()
        .unwrap();
    assert!(drift < 1.0, "{drift}");
}
