use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MwKind {
    Pi,
    HalfPi,
}

/// Microwave pulse followed by a free-evolution delay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwOp {
    pub kind: MwKind,
    pub freq_mhz: f64,
    /// Zero for ideal instantaneous pulses.
    pub duration_ns: f64,
    pub delay_after_ns: f64,
}

/// One repetition: laser init, wait `t_w`, microwave block, readout, padding.
///
/// The readout window opens at the start of the next laser pulse, so the
/// only laser exposure per repetition is `laser_init_ns`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseSequence {
    pub laser_init_ns: f64,
    pub t_w_ns: f64,
    pub mw_ops: Vec<MwOp>,
    pub readout_window_ns: f64,
    pub t_r_ns: f64,
}

impl Default for PulseSequence {
    fn default() -> Self {
        Self {
            laser_init_ns: 300.0,
            t_w_ns: 1500.0,
            mw_ops: Vec::new(),
            readout_window_ns: 300.0,
            t_r_ns: 12_000.0,
        }
    }
}

impl PulseSequence {
    pub fn mw_duration_ns(&self) -> f64 {
        self.mw_ops
            .iter()
            .map(|op| op.duration_ns + op.delay_after_ns)
            .sum()
    }

    pub fn used_ns(&self) -> f64 {
        self.laser_init_ns + self.t_w_ns + self.mw_duration_ns() + self.readout_window_ns
    }

    pub fn padding_ns(&self) -> f64 {
        self.t_r_ns - self.used_ns()
    }

    pub fn laser_on_ns(&self) -> f64 {
        self.laser_init_ns
    }

    pub fn validate(&self) -> Result<()> {
        let durations = [
            ("laser_init_ns", self.laser_init_ns),
            ("t_w_ns", self.t_w_ns),
            ("readout_window_ns", self.readout_window_ns),
            ("t_r_ns", self.t_r_ns),
        ];
        for (name, v) in durations {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(invalid(name, "must be a finite duration >= 0"));
            }
        }
        for op in &self.mw_ops {
            if !(op.duration_ns >= 0.0) || !(op.delay_after_ns >= 0.0) {
                return Err(invalid("mw_ops", "durations must be >= 0"));
            }
        }
        if !(self.readout_window_ns > 0.0) {
            return Err(invalid("readout_window_ns", "must be > 0"));
        }
        if self.padding_ns() < -1e-9 {
            return Err(Error::SequenceOverflow {
                required_ns: self.used_ns(),
                t_r_ns: self.t_r_ns,
            });
        }
        Ok(())
    }

    /// Ideal π pulse probing `freq_mhz`.
    pub fn pulsed_odmr(&self, freq_mhz: f64) -> Self {
        Self {
            mw_ops: vec![MwOp {
                kind: MwKind::Pi,
                freq_mhz,
                duration_ns: 0.0,
                delay_after_ns: 0.0,
            }],
            ..self.clone()
        }
    }

    /// Ramsey pair separated by `tau_ns`, with `t_r` unchanged.
    pub fn ramsey(&self, freq_mhz: f64, tau_ns: f64) -> Result<Self> {
        let seq = Self {
            mw_ops: vec![
                MwOp {
                    kind: MwKind::HalfPi,
                    freq_mhz,
                    duration_ns: 0.0,
                    delay_after_ns: tau_ns,
                },
                MwOp {
                    kind: MwKind::HalfPi,
                    freq_mhz,
                    duration_ns: 0.0,
                    delay_after_ns: 0.0,
                },
            ],
            ..self.clone()
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn with_wait(&self, t_w_ns: f64) -> Result<Self> {
        let seq = Self {
            t_w_ns,
            ..self.clone()
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn repetitions_in(&self, seconds: f64) -> u64 {
        (seconds / (self.t_r_ns * 1e-9) + 1e-9).floor() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_leaves_room_for_long_ramsey() {
        let s = PulseSequence::default();
        assert!(s.validate().is_ok());
        let r = s.ramsey(2870.0, 9_900.0).unwrap();
        assert!(r.padding_ns().abs() < 1e-9);
        assert!(matches!(
            s.ramsey(2870.0, 9_901.0),
            Err(Error::SequenceOverflow { .. })
        ));
    }

    #[test]
    fn laser_time_is_independent_of_tau() {
        let s = PulseSequence::default();
        let a = s.ramsey(2870.0, 10.0).unwrap();
        let b = s.ramsey(2870.0, 5000.0).unwrap();
        assert_eq!(a.laser_on_ns(), b.laser_on_ns());
        assert_eq!(a.t_r_ns, b.t_r_ns);
        assert!((a.padding_ns() - b.padding_ns() - 4990.0).abs() < 1e-9);
    }

    #[test]
    fn repetitions_per_sample() {
        let s = PulseSequence::default();
        assert_eq!(s.repetitions_in(5e-3), 416);
        assert_eq!(s.repetitions_in(12e-6), 1);
    }
}
