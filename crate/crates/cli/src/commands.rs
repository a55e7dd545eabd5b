//! One function per subcommand. Each writes CSV/JSON into the run directory.

use serde::Serialize;
use serde_json::json;

use nvtherm_core::fitters::{
    calibrate_temperature, estimate_sensitivity, fit_exponential, fit_fid, fit_gaussian_histogram,
    fit_lorentzian_multi, optimal_wait, stddev_vs_integration, FidFitOptions, FitResult,
    LorentzianFitOptions, SensitivityInputs,
};
use nvtherm_core::magnet::solve_magnetization;
use nvtherm_core::nvspin::{d_of_temperature, fid_responsivity, fid_signal, NvParams};
use nvtherm_core::protocol::{
    run_chopped_dc, run_cooling_scan, run_fid_scan, run_pulsed_odmr, run_realtime_tracker,
    ChoppedDcRun, EnvironmentSchedule, HeaterDrive, Scene, SweepOptions, TrackerOptions,
};
use nvtherm_core::stats::{mean, shapiro_wilk, std_dev};
use nvtherm_core::thermal::Waveform;

use crate::config::Config;
use crate::error::CliError;
use crate::output::Run;

fn grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(CliError::Config(format!(
            "empty grid: [{lo}, {hi}] with step {step}"
        )));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| lo + step * k as f64).collect())
}

fn centered(center: f64, half_span: f64, step: f64) -> Result<Vec<f64>, CliError> {
    grid(center - half_span, center + half_span, step)
}

fn need_shots(shots: u64, what: &str) -> Result<u64, CliError> {
    if shots == 0 {
        return Err(CliError::Config(format!("{what}.shots_per_point must be >= 1")));
    }
    Ok(shots)
}

pub fn demag(config: &Config, run: &mut Run) -> Result<(), CliError> {
    let c = &config.demag;
    let temps = grid(c.t_min_k, c.t_max_k, c.t_step_k)?;
    let scene = config.scene.build()?;
    let sensor = &scene.sensor;
    let field = c.field_g.unwrap_or_else(|| sensor.b_ext.norm());
    let mut rows = Vec::with_capacity(temps.len());
    for &t in &temps {
        let m = solve_magnetization(t, field, &sensor.mnp)?.m;
        let tp = sensor.transitions(t)?;
        rows.push(vec![
            t,
            m,
            sensor.field_at_nv(t)?.parallel,
            tp.f_minus,
            tp.f_plus,
            sensor.susceptibility_dfdt(t)?,
        ]);
    }
    run.csv(
        "demag.csv",
        &["T_K", "m", "B_parallel_G", "f_minus_MHz", "f_plus_MHz", "dfdT_MHz_per_K"],
        &rows,
    )?;
    let coarse = rows
        .iter()
        .max_by(|a, b| a[5].abs().total_cmp(&b[5].abs()))
        .map(|r| r[0])
        .unwrap_or(c.t_min_k);
    let half = c.t_step_k.max(0.5);
    let peak = sensor.peak_susceptibility(coarse, half)?;
    run.json(
        "demag_summary.json",
        &json!({
            "field_g": field,
            "peak_temperature_k": peak.temperature,
            "peak_dfdt_mhz_per_k": peak.signed,
            "enhancement_over_dd_dt": peak.magnitude / sensor.nv.dd_dt.abs(),
        }),
    )
}

fn dip_options(nv: &NvParams, n_dips: usize, hyperfine: bool) -> LorentzianFitOptions {
    LorentzianFitOptions {
        n_dips,
        hyperfine_split: (hyperfine && nv.hyperfine_split > 0.0).then_some(nv.hyperfine_split),
        linewidth: nv.linewidth,
    }
}

pub fn odmr(config: &Config, run: &mut Run) -> Result<(), CliError> {
    let c = &config.odmr;
    if c.temperatures_k.is_empty() {
        return Err(CliError::Config("odmr.temperatures_k is empty".into()));
    }
    let shots = need_shots(c.shots_per_point, "odmr")?;
    let scene = config.scene.build()?;
    let excess = scene.laser_excess(scene.sequence.t_w_ns * 1e-9)?;
    let nv = &scene.sensor.nv;
    let mut spectra = Vec::new();
    let mut fits = Vec::new();
    for (i, &t) in c.temperatures_k.iter().enumerate() {
        let expected = scene.sensor.f_minus(t + excess)?;
        let f = centered(expected, c.half_span_mhz, c.step_mhz)?;
        let series = run_pulsed_odmr(&scene, &f, t, shots, i as u64)?;
        for k in 0..f.len() {
            spectra.push(vec![t, f[k], series.counts[k] as f64, series.signal[k]]);
        }
        let fit = fit_lorentzian_multi(&f, &series.signal, &dip_options(nv, 1, true))?;
        fits.push(vec![
            t,
            fit.centers()[0],
            fit.stderr("center_0").unwrap_or(f64::NAN),
            expected,
        ]);
    }
    run.csv("odmr.csv", &["T_K", "f_MHz", "counts", "S_norm"], &spectra)?;
    run.csv(
        "odmr_fits.csv",
        &["T_K", "f_center_MHz", "f_center_stderr_MHz", "f_model_MHz"],
        &fits,
    )
}

pub fn fid(config: &Config, run: &mut Run) -> Result<(), CliError> {
    let c = &config.fid;
    let shots = need_shots(c.shots_per_point, "fid")?;
    let tau = grid(0.0, c.tau_max_us, c.tau_step_us)?;
    let scene = config.scene.build()?;
    let scan = run_fid_scan(&scene, &tau, c.delta_f_mhz, shots, 0)?;
    let fit = fit_fid(&tau, &scan.series.signal, &FidFitOptions { fixed_nu: c.fixed_nu })?;
    let get = |name: &str| fit.get(name).unwrap_or(f64::NAN);
    let fitted = NvParams {
        contrast: get("C"),
        t2_star: get("t2_star"),
        nu: c.fixed_nu.unwrap_or_else(|| get("nu")),
        ..scene.sensor.nv.clone()
    };
    let rows: Vec<Vec<f64>> = tau
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            vec![
                t,
                scan.series.counts[k] as f64,
                scan.series.signal[k],
                fid_signal(t, get("delta_f"), &fitted),
            ]
        })
        .collect();
    run.csv("fid.csv", &["t_us", "counts", "S_norm", "S_fit"], &rows)?;
    run.json(
        "fid_fit.json",
        &json!({
            "drive_mhz": scan.drive_mhz,
            "t_r_ns": scan.t_r_ns,
            "shots_per_point": shots,
            "fit": fit,
        }),
    )
}

pub fn cooling(config: &Config, run: &mut Run) -> Result<(), CliError> {
    let c = &config.cooling;
    let shots = need_shots(c.shots_per_point, "cooling")?;
    let scene = config.scene.build()?;
    let sweep = SweepOptions {
        half_span_mhz: c.half_span_mhz,
        step_mhz: c.step_mhz,
        shots_per_point: shots,
    };
    let scan = run_cooling_scan(&scene, &c.t_w_ns, &sweep)?;
    let t_us: Vec<f64> = scan.t_w_ns.iter().map(|t| t * 1e-3).collect();
    let mk: Vec<f64> = scan.delta_t_k.iter().map(|v| v * 1e3).collect();
    let rows: Vec<Vec<f64>> = (0..t_us.len())
        .map(|k| vec![t_us[k], scan.center_mhz[k], mk[k], scan.true_excess_k[k] * 1e3])
        .collect();
    run.csv("cooling.csv", &["t_us", "f_MHz", "dT_mK", "dT_true_mK"], &rows)?;
    let fit = fit_exponential(&t_us, &mk)?;
    let tau = fit.get("tau").unwrap_or(f64::NAN);
    run.json(
        "cooling_fit.json",
        &json!({
            "amplitude_mk": fit.get("amplitude"),
            "tau_us": tau,
            "recovery_3tau_us": 3.0 * tau,
            "reference_center_mhz": scan.reference_center_mhz,
            "dfdt_mhz_per_k": scan.dfdt_mhz_per_k,
            "fit": fit,
        }),
    )
}

fn sensitivity_inputs(config: &Config, scene: &Scene, delta_f: f64, t: Option<f64>) -> Result<SensitivityInputs, CliError> {
    let nv = &scene.sensor.nv;
    let t = t.unwrap_or(scene.environment.base_k);
    Ok(SensitivityInputs {
        contrast: nv.contrast,
        t2_star_us: nv.t2_star,
        nu: nv.nu,
        delta_f_mhz: delta_f,
        l_eff: config.scene.l_eff,
        dfdt_mhz_per_k: scene.sensor.susceptibility_dfdt(t)?.abs(),
    })
}

#[derive(Serialize)]
struct TrackSummary {
    tau_us: f64,
    shots_per_sample: u64,
    samples: usize,
    sigma_mk: f64,
    gaussian_sigma_mk: f64,
    gaussian_mean_mk: f64,
    shapiro_w: f64,
    shapiro_p: f64,
    integration_slope: Option<f64>,
    integration_slope_stderr: Option<f64>,
    eta_uk_per_sqrt_hz: Option<f64>,
    working_point: nvtherm_core::protocol::WorkingPoint,
}

pub fn track(config: &Config, run: &mut Run) -> Result<(), CliError> {
    let c = &config.track;
    let scene = config.scene.build()?;
    let nv = &scene.sensor.nv;
    let tau = match c.tau_us {
        Some(t) => t,
        None => optimal_wait(nv.contrast, nv.t2_star, nv.nu, c.delta_f_mhz)?,
    };
    let tr = run_realtime_tracker(
        &scene,
        &TrackerOptions {
            duration_s: c.duration_s,
            sample_time_s: c.sample_time_s,
            tau_us: tau,
            delta_f_mhz: c.delta_f_mhz,
            inversion: c.inversion,
        },
    )?;
    let est = tr.estimates();
    let base = scene.environment.base_k;
    let s = &tr.series;
    let rows: Vec<Vec<f64>> = (0..est.len())
        .map(|k| {
            vec![
                s.timestamps[k],
                s.counts[k] as f64,
                s.signal[k],
                est[k],
                tr.true_temperature_k[k],
                (est[k] - base) * 1e3,
            ]
        })
        .collect();
    run.csv("track.csv", &["t_s", "counts", "S_norm", "T_K", "T_true_K", "dT_mK"], &rows)?;

    let err_mk: Vec<f64> = est
        .iter()
        .zip(&tr.true_temperature_k)
        .map(|(e, t)| (e - t) * 1e3)
        .collect();
    let g = fit_gaussian_histogram(&err_mk, c.histogram_bins)?;
    let centers = g.histogram.centers();
    let hist_rows: Vec<Vec<f64>> = centers
        .iter()
        .zip(&g.histogram.counts)
        .map(|(&x, &n)| {
            let model = g.amplitude * (-0.5 * ((x - g.mean) / g.sigma).powi(2)).exp();
            vec![x, n as f64, model]
        })
        .collect();
    run.csv("track_histogram.csv", &["dT_mK", "count", "gaussian"], &hist_rows)?;

    let windows: Vec<f64> = c
        .windows_s
        .iter()
        .copied()
        .filter(|&wnd| 10.0 * wnd <= c.duration_s + 1e-9)
        .collect();
    let err_k: Vec<f64> = err_mk.iter().map(|v| v * 1e-3).collect();
    let analysis = if windows.len() >= 2 {
        let a = stddev_vs_integration(&err_k, c.sample_time_s, &windows)?;
        let rows: Vec<Vec<f64>> = a
            .windows_s
            .iter()
            .zip(&a.sigma)
            .map(|(&wnd, &sd)| vec![wnd, sd * 1e3])
            .collect();
        run.csv("track_integration.csv", &["window_s", "sigma_mK"], &rows)?;
        Some(a)
    } else {
        None
    };
    let sw = shapiro_wilk(&err_mk)?;
    run.json(
        "track_summary.json",
        &TrackSummary {
            tau_us: tau,
            shots_per_sample: tr.shots_per_sample,
            samples: est.len(),
            sigma_mk: std_dev(&err_mk),
            gaussian_sigma_mk: g.sigma,
            gaussian_mean_mk: g.mean,
            shapiro_w: sw.w,
            shapiro_p: sw.p_value,
            integration_slope: analysis.as_ref().and_then(|a| a.slope),
            integration_slope_stderr: analysis.as_ref().and_then(|a| a.slope_stderr),
            eta_uk_per_sqrt_hz: analysis.as_ref().map(|a| a.eta * 1e6),
            working_point: tr.working_point,
        },
    )
}

fn heater_rows(r: &ChoppedDcRun) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let trace = (0..r.time_s.len())
        .map(|k| {
            vec![
                r.time_s[k],
                r.current_a[k],
                r.b_wire_g[k],
                r.f_measured_mhz[k],
                r.delta_t_k[k] * 1e3,
                r.true_delta_t_k[k] * 1e3,
            ]
        })
        .collect();
    let folded = r
        .folded_time_s
        .iter()
        .zip(&r.folded_delta_t_k)
        .map(|(&t, &v)| vec![t, v * 1e3])
        .collect();
    (trace, folded)
}

const HEATER_HEADER: [&str; 6] = ["t_s", "I_A", "B_wire_G", "f_MHz", "dT_mK", "dT_true_mK"];

fn heater_summary(r: &ChoppedDcRun) -> serde_json::Value {
    let step = r.step_response();
    json!({
        "step_amplitude_mk": step.map(|s| s.0 * 1e3),
        "step_tau_s": step.map(|s| s.1),
        "max_abs_drift_mk": r.max_abs_drift_k() * 1e3,
        "dfdt_mhz_per_k": r.dfdt_mhz_per_k,
        "edges": r.edges,
    })
}

pub fn heater(config: &Config, run: &mut Run) -> Result<(), CliError> {
    let c = &config.heater;
    let scene = config.scene.build()?;
    let drive = HeaterDrive {
        current: Waveform {
            segments: c.current.clone(),
            repeat: true,
        },
        i0_a: c.i0_a,
        field_per_ampere_g: c.field_per_ampere_g,
    };
    let main = run_chopped_dc(&scene, &drive, &c.options)?;
    let (trace, folded) = heater_rows(&main);
    run.csv("heater.csv", &HEATER_HEADER, &trace)?;
    run.csv("heater_folded.csv", &["t_s", "dT_mK"], &folded)?;
    let mut summary = json!({ "chopped": heater_summary(&main) });
    if c.control {
        let peak = c.current.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
        let control = HeaterDrive {
            current: Waveform {
                segments: c
                    .current
                    .iter()
                    .enumerate()
                    .map(|(k, s)| (s.0, if k % 2 == 0 { peak } else { -peak }))
                    .collect(),
                repeat: true,
            },
            ..drive
        };
        let ctl = run_chopped_dc(&scene, &control, &c.options)?;
        let (trace, folded) = heater_rows(&ctl);
        run.csv("heater_control.csv", &HEATER_HEADER, &trace)?;
        run.csv("heater_control_folded.csv", &["t_s", "dT_mK"], &folded)?;
        summary["polarity_control"] = heater_summary(&ctl);
    }
    run.json("heater_summary.json", &summary)
}

pub fn sensitivity(config: &Config, run: &mut Run) -> Result<(), CliError> {
    let c = &config.sensitivity;
    let scene = config.scene.build()?;
    let inputs = sensitivity_inputs(config, &scene, c.delta_f_mhz, c.temperature_k)?;
    let report = estimate_sensitivity(&inputs)?;
    let nv = NvParams {
        contrast: inputs.contrast,
        t2_star: inputs.t2_star_us,
        nu: inputs.nu,
        ..scene.sensor.nv.clone()
    };
    let n = c.curve_points.max(2);
    let t_max = 5.0 * inputs.t2_star_us;
    let rows: Vec<Vec<f64>> = (1..=n)
        .map(|k| {
            let t = t_max * k as f64 / n as f64;
            vec![t, fid_responsivity(t, inputs.delta_f_mhz, &nv)]
        })
        .collect();
    run.csv("sensitivity_curve.csv", &["t_us", "dS_df_per_MHz"], &rows)?;
    run.json(
        "sensitivity.json",
        &json!({
            "eta_t_uk_per_sqrt_hz": report.eta_t * 1e6,
            "eta_t_envelope_uk_per_sqrt_hz": report.eta_t_envelope * 1e6,
            "report": report,
        }),
    )
}

/// D from the mean of the four hyperfine-resolved lines of a reference NV.
fn reference_d(scene: &Scene, t: f64, shots: u64, stream: u64) -> Result<(f64, FitResult), CliError> {
    let nv = &scene.sensor.nv;
    let d = d_of_temperature(t, nv);
    let tp = scene.sensor.transitions(t)?;
    let half = 0.5 * (tp.f_plus - tp.f_minus) + nv.hyperfine_split + 4.0 * nv.linewidth;
    let f = centered(d, half, nv.linewidth / 6.0)?;
    let series = run_pulsed_odmr(scene, &f, t, shots, stream)?;
    let lines = if nv.hyperfine_split > 0.0 { 4 } else { 2 };
    let fit = fit_lorentzian_multi(&f, &series.signal, &dip_options(nv, lines, false))?;
    Ok((mean(&fit.centers()), fit))
}

pub fn calibrate(config: &Config, run: &mut Run) -> Result<(), CliError> {
    let c = &config.calibrate;
    let nv = config.scene.nv.clone();
    let (points, truth): (Vec<(f64, f64)>, Option<Vec<f64>>) = if c.points.is_empty() {
        let shots = need_shots(c.shots_per_point, "calibrate")?;
        if c.settings.is_empty() {
            return Err(CliError::Config("calibrate.settings is empty".into()));
        }
        let mut p = config.scene.clone();
        p.mnp.m_sat = 0.0;
        p.calibration = None;
        p.laser = None;
        p.stripline = None;
        p.b_ext_g = nv.axis * c.reference_field_g;
        p.environment = EnvironmentSchedule::constant(c.base_k);
        let reference = p.build()?;
        let truth: Vec<f64> = c
            .settings
            .iter()
            .map(|v| c.base_k + c.coefficient_k * v * v)
            .collect();
        let mut points = Vec::new();
        for (i, (&v, &t)) in c.settings.iter().zip(&truth).enumerate() {
            points.push((v, reference_d(&reference, t, shots, i as u64)?.0));
        }
        (points, Some(truth))
    } else {
        (c.points.clone(), None)
    };
    let cal = calibrate_temperature(&points, &nv)?;
    let rows: Vec<Vec<f64>> = points
        .iter()
        .enumerate()
        .map(|(k, &(v, d))| {
            let mut row = vec![v, d, cal.temperature_at(v)];
            if let Some(t) = &truth {
                row.push(t[k]);
            }
            row
        })
        .collect();
    let header: &[&str] = if truth.is_some() {
        &["setting", "D_MHz", "T_K", "T_true_K"]
    } else {
        &["setting", "D_MHz", "T_K"]
    };
    run.csv("calibrate.csv", header, &rows)?;
    run.json("calibrate_summary.json", &cal)
}
