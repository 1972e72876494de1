use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{DensityMatrix, Emitter, JumpOperator, LindbladSystem};
use crate::error::Result;
use crate::params::{AtomParams, DriveParams};

/// Populations and optical coherence of a two-level atom.
/// Basis: |g> = 0, |e> = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelState {
    pub rho_ee: f64,
    /// <e|rho|g>.
    pub rho_eg: Complex64,
}

impl TwoLevelState {
    pub fn ground() -> Self {
        Self {
            rho_ee: 0.0,
            rho_eg: Complex64::new(0.0, 0.0),
        }
    }

    pub fn excited() -> Self {
        Self {
            rho_ee: 1.0,
            rho_eg: Complex64::new(0.0, 0.0),
        }
    }

    pub fn from_density(rho: &DensityMatrix) -> Self {
        assert_eq!(rho.dim(), 2, "two-level state needs a 2x2 density matrix");
        Self {
            rho_ee: rho.population(1),
            rho_eg: rho.coherence(1, 0),
        }
    }

    pub fn to_density(&self) -> DensityMatrix {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0 - self.rho_ee, 0.0),
                self.rho_eg.conj(),
                self.rho_eg,
                Complex64::new(self.rho_ee, 0.0),
            ],
        );
        DensityMatrix::from_matrix(m)
    }
}

pub(super) fn system(gamma: f64, drive: &DriveParams) -> LindbladSystem {
    let z = Complex64::new(0.0, 0.0);
    let half_rabi = Complex64::new(0.5 * drive.rabi_angular(), 0.0);
    let h = DMatrix::from_row_slice(
        2,
        2,
        &[z, half_rabi, half_rabi, Complex64::new(-drive.detuning_angular(), 0.0)],
    );
    let mut c = DMatrix::zeros(2, 2);
    c[(0, 1)] = Complex64::new(gamma.sqrt(), 0.0);
    LindbladSystem::new(h, vec![JumpOperator { op: c, reset_level: 0 }])
}

/// Stationary state of the driven two-level atom.
pub fn two_level_steady(drive: &DriveParams, atom: &AtomParams) -> Result<TwoLevelState> {
    atom.validate()?;
    let rho = Emitter::two_level(atom).system(drive)?.steady_state()?;
    Ok(TwoLevelState::from_density(&rho))
}

/// Optical Bloch evolution from `initial` sampled at `times` (us, from 0).
pub fn two_level_evolve(
    initial: &DensityMatrix,
    drive: &DriveParams,
    atom: &AtomParams,
    times: &[f64],
) -> Result<Vec<TwoLevelState>> {
    atom.validate()?;
    let traj = Emitter::two_level(atom).system(drive)?.evolve(initial, times)?;
    Ok(traj.iter().map(TwoLevelState::from_density).collect())
}
