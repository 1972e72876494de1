//! Stochastic forward model of the experiment: quantum-jump photon
//! emission, atom arrival and dwell, probe gating, two-detector readout,
//! coincidence histogramming and the delayed-gate decay scan.
//!
//! Every random quantity is drawn from a ChaCha substream keyed by the
//! master seed plus a fixed label and a task index (atom, chunk, trajectory),
//! so results do not depend on how rayon schedules the work.

mod correlate;
mod decay;
mod detect;
mod emission;
mod occupancy;
mod rng;
mod stream;

pub use correlate::cross_correlate;
pub use decay::{decay_scan, DecayScan};
pub use detect::{split_and_detect, DetectorConfig};
pub use emission::{
    excited_population_average, simulate_emission, JumpSampler, PopulationEstimate,
};
pub use occupancy::{apply_occupancy_and_gating, GatingConfig, OccupancyModel};
pub use stream::PhotonStream;

use serde::{Deserialize, Serialize};

use crate::bloch::Emitter;
use crate::curves::Histogram;
use crate::error::{ensure_positive, Result};
use crate::params::DriveParams;

/// Full HBT acquisition: emission, gating, detection and correlation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HbtExperiment {
    pub emitter: Emitter,
    pub drive: DriveParams,
    pub occupancy: OccupancyModel,
    pub gating: GatingConfig,
    pub detector: DetectorConfig,
    /// Acquisition time, us.
    pub duration: f64,
    /// ns.
    pub bin_width: f64,
    /// ns.
    pub max_delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HbtOutcome {
    pub histogram: Histogram,
    /// Photons emitted by all atoms before detection.
    pub emitted: usize,
    /// Counts recorded on channels 1 and 2.
    pub singles: [usize; 2],
}

impl HbtExperiment {
    /// Expected accidental coincidences per bin that involve at least one
    /// dark count, given the recorded singles.
    pub fn accidental_background(&self, singles: [usize; 2]) -> f64 {
        let t_ns = self.duration * 1e3;
        let s1 = singles[0] as f64 / t_ns;
        let s2 = singles[1] as f64 / t_ns;
        let d = self.detector.dark_rate * 1e-9;
        ((s1 * d + d * s2 - d * d) * self.bin_width * t_ns).max(0.0)
    }

    pub fn run(&self, seed: u64) -> Result<HbtOutcome> {
        ensure_positive("bin_width", self.bin_width)?;
        ensure_positive("max_delay", self.max_delay)?;
        let emitted = apply_occupancy_and_gating(
            &self.emitter,
            &self.drive,
            &self.occupancy,
            &self.gating,
            self.duration,
            rng::derive(seed, rng::PIPELINE_EMISSION),
        )?;
        let (ch1, ch2) = split_and_detect(
            &emitted,
            &self.detector,
            rng::derive(seed, rng::PIPELINE_DETECTION),
        )?;
        let histogram = cross_correlate(&ch1, &ch2, self.bin_width, self.max_delay)?;
        Ok(HbtOutcome {
            histogram,
            emitted: emitted.len(),
            singles: [ch1.len(), ch2.len()],
        })
    }
}
