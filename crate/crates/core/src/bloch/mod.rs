//! Density-matrix models of the driven atom: the two-level atom, the V-type
//! scheme with vacuum-induced cross damping, and excitation spectra.

mod density;
mod lindblad;
mod spectrum;
mod two_level;
mod vtype;

pub use density::DensityMatrix;
pub use lindblad::{JumpOperator, LindbladSystem, Propagator};
pub use spectrum::{dip_metrics, excitation_spectrum, spectral_fwhm, DipMetrics};
pub use two_level::{two_level_evolve, two_level_steady, TwoLevelState};
pub use vtype::{vtype_steady, VTypeScheme};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Result};
use crate::params::{AtomParams, DriveParams};

/// Internal-state model of the emitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Emitter {
    /// Two-level atom with population decay rate `gamma` (1/us).
    TwoLevel { gamma: f64 },
    /// One ground level coupled to a closely spaced upper doublet.
    VType(VTypeScheme),
}

impl Emitter {
    pub fn two_level(atom: &AtomParams) -> Self {
        Emitter::TwoLevel {
            gamma: atom.gamma_pop,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Emitter::TwoLevel { gamma } => ensure_positive("gamma", *gamma),
            Emitter::VType(s) => s.validate(),
        }
    }

    /// Master equation for this emitter under `drive`.
    pub fn system(&self, drive: &DriveParams) -> Result<LindbladSystem> {
        self.validate()?;
        drive.validate()?;
        Ok(match self {
            Emitter::TwoLevel { gamma } => two_level::system(*gamma, drive),
            Emitter::VType(s) => s.system(drive),
        })
    }

    /// Level the atom starts in before the probe is switched on.
    pub fn ground_level(&self) -> usize {
        0
    }

    /// Number of ground levels; they occupy indices 0..n_ground.
    pub fn n_ground(&self) -> usize {
        match self {
            Emitter::VType(VTypeScheme {
                ground_split: Some(_),
                ..
            }) => 2,
            _ => 1,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Emitter::TwoLevel { .. } => 2,
            Emitter::VType(s) => s.dim(),
        }
    }

    /// Upper bound on the photon emission rate per atom (1/us): half the
    /// largest eigenvalue of the decay matrix.
    pub fn max_emission_rate(&self) -> f64 {
        match self {
            Emitter::TwoLevel { gamma } => 0.5 * gamma,
            Emitter::VType(s) => 0.5 * s.gamma * (1.0 + s.p),
        }
    }
}
