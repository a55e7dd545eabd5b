use serde::{Deserialize, Serialize};

/// Photon-count record of one simulated acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotSeries {
    pub protocol: String,
    /// Seed of the stream the counts were drawn from.
    pub rng_seed: u64,
    /// End of each point's acquisition (s), strictly increasing.
    pub timestamps: Vec<f64>,
    /// Name of the scanned variable, e.g. `f_MHz`.
    pub abscissa_label: String,
    pub abscissa: Vec<f64>,
    pub shots: Vec<u64>,
    pub counts: Vec<u64>,
    /// Counts over the all-bright expectation.
    pub signal: Vec<f64>,
    pub frequency_mhz: Option<Vec<f64>>,
    pub temperature_k: Option<Vec<f64>>,
}

impl ShotSeries {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}
