use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::detect::{split_and_detect, DetectorConfig};
use super::occupancy::{apply_occupancy_and_gating, GatingConfig, OccupancyModel};
use super::rng;
use crate::bloch::Emitter;
use crate::curves::{read_columns, write_columns};
use crate::error::{Error, Result};
use crate::params::{ns_to_us, DriveParams};

/// Photon counts per detection-gate delay, accumulated over many cycles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayScan {
    /// Gate opening times after the probe switches on, us.
    pub delays: Vec<f64>,
    pub counts: Vec<u64>,
    /// us.
    pub gate_width: f64,
    pub n_cycles: u64,
}

impl DecayScan {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let counts: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        write_columns(w, ["delay_us", "counts"], &self.delays, &counts)
    }

    /// Reads `delay_us,counts`. The gate width is taken from the delay
    /// spacing; the cycle count is not stored and comes back as 0.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let (delays, raw) = read_columns(r, "delay_us")?;
        if delays.len() < 2 {
            return Err(Error::Data("decay scan needs at least two gates".into()));
        }
        let counts = raw
            .iter()
            .map(|&c| {
                if c >= 0.0 && c.fract() == 0.0 {
                    Ok(c as u64)
                } else {
                    Err(Error::Data(format!("counts must be nonnegative integers, got {c}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            gate_width: delays[1] - delays[0],
            delays,
            counts,
            n_cycles: 0,
        })
    }
}

/// Delayed-gate scan: gates of `gating.gate_width` starting at
/// `gating.gate_delay` tile the probe window, and each detected photon is
/// credited to the gate it falls in. A single detector records the light,
/// so the detector split ratio is ignored.
pub fn decay_scan(
    emitter: &Emitter,
    drive: &DriveParams,
    occupancy: &OccupancyModel,
    gating: &GatingConfig,
    detector: &DetectorConfig,
    n_cycles: u64,
    seed: u64,
) -> Result<DecayScan> {
    gating.validate()?;
    if n_cycles == 0 {
        return Err(Error::InvalidParameter {
            name: "n_cycles",
            reason: "must be >= 1".into(),
        });
    }
    if gating.is_continuous() {
        return Err(Error::InvalidParameter {
            name: "gating.off_period",
            reason: "a decay scan needs loading periods (off_period < cycle_period)".into(),
        });
    }
    let w = gating.gate_width;
    let n_gates = ((gating.off_period - gating.gate_delay) / w * (1.0 + 1e-12)).floor() as usize;
    let delays: Vec<f64> = (0..n_gates).map(|k| gating.gate_delay + k as f64 * w).collect();

    let duration = n_cycles as f64 * gating.cycle_period;
    let emitted = apply_occupancy_and_gating(
        emitter,
        drive,
        occupancy,
        gating,
        duration,
        rng::derive(seed, rng::PIPELINE_EMISSION),
    )?;
    let single = DetectorConfig {
        split_ratio: 1.0,
        ..*detector
    };
    let (detected, _) = split_and_detect(&emitted, &single, rng::derive(seed, rng::PIPELINE_DETECTION))?;

    let on = gating.cycle_period - gating.off_period;
    let mut counts = vec![0u64; n_gates];
    for &t in detected.times() {
        let into_window = ns_to_us(t).rem_euclid(gating.cycle_period) - on - gating.gate_delay;
        if into_window >= 0.0 {
            let k = (into_window / w).floor() as usize;
            if k < n_gates {
                counts[k] += 1;
            }
        }
    }
    Ok(DecayScan {
        delays,
        counts,
        gate_width: w,
        n_cycles,
    })
}
