use rayon::prelude::*;

use super::{rng_for, simulate_shots, stream_seed, Scene, ShotSeries};
use crate::error::Result;

/// ms = 0 population that reproduces a normalized signal `s`.
pub(crate) fn population_from_signal(s: f64, contrast: f64) -> f64 {
    (1.0 - (1.0 - s) / contrast).clamp(0.0, 1.0)
}

/// Counts for each point, drawn in parallel from per-point streams.
pub(crate) fn acquire(scene: &Scene, seed: u64, p0: &[f64], shots: &[u64]) -> Result<Vec<u64>> {
    let window = scene.sequence.readout_window_ns;
    p0.par_iter()
        .zip(shots.par_iter())
        .enumerate()
        .map(|(i, (&p, &n))| {
            let mut rng = rng_for(seed, i as u64);
            simulate_shots(p, n, window, &scene.readout, &mut rng)
        })
        .collect()
}

pub(crate) fn build_series(
    scene: &Scene,
    protocol: &str,
    stream: u64,
    label: &str,
    abscissa: Vec<f64>,
    p0: &[f64],
    shots: Vec<u64>,
) -> Result<ShotSeries> {
    let seed = stream_seed(scene.seed, stream);
    let counts = acquire(scene, seed, p0, &shots)?;
    let window = scene.sequence.readout_window_ns;
    let signal = counts
        .iter()
        .zip(&shots)
        .map(|(&c, &n)| scene.readout.normalize(c, n, window))
        .collect();
    let t_r = scene.sequence.t_r_ns * 1e-9;
    let mut elapsed = 0.0;
    let timestamps = shots
        .iter()
        .map(|&n| {
            elapsed += n.max(1) as f64 * t_r;
            elapsed
        })
        .collect();
    Ok(ShotSeries {
        protocol: protocol.to_string(),
        rng_seed: seed,
        timestamps,
        abscissa_label: label.to_string(),
        abscissa,
        shots,
        counts,
        signal,
        frequency_mhz: None,
        temperature_k: None,
    })
}
