//! Shared inputs for the benchmarks.

use nanofiber_core::bloch::Emitter;
use nanofiber_core::montecarlo::{DetectorConfig, GatingConfig, HbtExperiment, OccupancyModel};
use nanofiber_core::params::{AtomParams, DriveParams};

/// Continuous single-atom HBT run of `duration` us at 13 MHz Rabi frequency.
pub fn single_atom_hbt(duration: f64) -> HbtExperiment {
    HbtExperiment {
        emitter: Emitter::two_level(&AtomParams::default()),
        drive: DriveParams::resonant(13.0),
        occupancy: OccupancyModel::Fixed { atoms: 1 },
        gating: GatingConfig::continuous(),
        detector: DetectorConfig::default(),
        duration,
        bin_width: 1.0,
        max_delay: 150.0,
    }
}

/// Loading-cycle gating with 1 ms probe windows and 50 us gates.
pub fn decay_gating() -> GatingConfig {
    GatingConfig {
        off_period: 1000.0,
        cycle_period: 21_000.0,
        gate_delay: 0.0,
        gate_width: 50.0,
    }
}
