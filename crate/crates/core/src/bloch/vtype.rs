use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DensityMatrix, Emitter, JumpOperator, LindbladSystem};
use crate::error::{ensure_nonnegative, ensure_positive, ensure_unit_interval, Result};
use crate::params::{mhz_to_angular, AtomParams, DriveParams};

/// Ground level |0> driven to two upper levels split by `delta_split`.
///
/// Basis: |0> ground, |1> upper at +delta_split/2, |2> upper at
/// -delta_split/2 (relative to the doublet midpoint). Both upper levels decay
/// to the ground at `gamma`; `p` is the normalized cross-damping between the
/// two decay channels (p = 1: parallel dipoles, maximal interference).
///
/// With `ground_split` set, the ground is itself a doublet |0>, |1> split by
/// that amount and the upper levels move to |2>, |3>; each upper level then
/// decays to either ground sub-level with rate gamma/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VTypeScheme {
    /// Decay rate of each upper level, 1/us.
    pub gamma: f64,
    /// Upper-level spacing, MHz.
    pub delta_split: f64,
    /// Cross-damping parameter in [0, 1].
    pub p: f64,
    /// Rabi amplitude on the |2> arm relative to the |1> arm.
    pub drive_ratio: f64,
    /// Ground sub-level spacing, MHz (four-level extension; off by default).
    pub ground_split: Option<f64>,
}

impl Default for VTypeScheme {
    fn default() -> Self {
        Self::for_atom(&AtomParams::default())
    }
}

impl VTypeScheme {
    /// Doublet with the atom's total decay shared equally by the two upper
    /// levels, so the symmetric (bright) superposition decays at gamma_pop.
    pub fn for_atom(atom: &AtomParams) -> Self {
        Self {
            gamma: 0.5 * atom.gamma_pop,
            delta_split: 1.5,
            p: 1.0,
            drive_ratio: 1.0,
            ground_split: None,
        }
    }

    pub fn with_split(self, delta_split: f64) -> Self {
        Self { delta_split, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("scheme.gamma", self.gamma)?;
        ensure_nonnegative("scheme.delta_split", self.delta_split)?;
        ensure_unit_interval("scheme.p", self.p)?;
        ensure_nonnegative("scheme.drive_ratio", self.drive_ratio)?;
        if let Some(g) = self.ground_split {
            ensure_nonnegative("scheme.ground_split", g)?;
        }
        Ok(())
    }

    pub(super) fn dim(&self) -> usize {
        if self.ground_split.is_some() {
            4
        } else {
            3
        }
    }

    pub(super) fn system(&self, drive: &DriveParams) -> LindbladSystem {
        let grounds: Vec<(usize, f64)> = match self.ground_split {
            None => vec![(0, 0.0)],
            Some(g) => vec![(0, -0.5 * mhz_to_angular(g)), (1, 0.5 * mhz_to_angular(g))],
        };
        let n = self.dim();
        let u1 = grounds.len();
        let u2 = u1 + 1;
        let half_split = 0.5 * mhz_to_angular(self.delta_split);
        let detuning = drive.detuning_angular();
        let c = |x: f64| Complex64::new(x, 0.0);

        let mut h = DMatrix::zeros(n, n);
        h[(u1, u1)] = c(half_split - detuning);
        h[(u2, u2)] = c(-half_split - detuning);
        let arm1 = 0.5 * drive.rabi_angular();
        let arm2 = arm1 * self.drive_ratio;
        for &(g, energy) in &grounds {
            h[(g, g)] = c(energy);
            h[(u1, g)] = c(arm1);
            h[(g, u1)] = c(arm1);
            h[(u2, g)] = c(arm2);
            h[(g, u2)] = c(arm2);
        }

        let branch = 1.0 / grounds.len() as f64;
        let mut jumps = Vec::new();
        for &(g, _) in &grounds {
            for sign in [1.0, -1.0] {
                let rate = branch * self.gamma * (1.0 + sign * self.p) / 2.0;
                if rate <= 0.0 {
                    continue;
                }
                let mut op = DMatrix::zeros(n, n);
                op[(g, u1)] = c(rate.sqrt());
                op[(g, u2)] = c(sign * rate.sqrt());
                jumps.push(JumpOperator { op, reset_level: g });
            }
        }
        LindbladSystem::new(h, jumps)
    }
}

/// Stationary density matrix of the V-type scheme; `drive.detuning` is
/// measured from the midpoint of the upper doublet.
pub fn vtype_steady(scheme: &VTypeScheme, drive: &DriveParams) -> Result<DensityMatrix> {
    Emitter::VType(*scheme).system(drive)?.steady_state()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::two_level_steady;
    use proptest::prelude::*;

    #[test]
    fn undriven_is_ground() {
        let rho = vtype_steady(&VTypeScheme::default(), &DriveParams::new(0.7, 0.0)).unwrap();
        assert!((rho.population(0) - 1.0).abs() < 1e-12);
        assert!(rho.population(1).abs() < 1e-12);
        assert!(rho.population(2).abs() < 1e-12);
    }

    #[test]
    fn widely_split_independent_arms_reduce_to_two_level() {
        let atom = AtomParams::default();
        let split = 100.0 * atom.linewidth_mhz();
        let scheme = VTypeScheme {
            gamma: atom.gamma_pop,
            delta_split: split,
            p: 0.0,
            drive_ratio: 1.0,
            ground_split: None,
        };
        for rabi in [1.0, 4.0, 13.0] {
            let drive = DriveParams::new(0.5 * split, rabi);
            let rho = vtype_steady(&scheme, &drive).unwrap();
            let two = two_level_steady(&DriveParams::resonant(rabi), &atom).unwrap();
            let rel = (rho.population(1) - two.rho_ee).abs() / two.rho_ee;
            assert!(rel < 0.01, "rabi {rabi}: {} vs {}", rho.population(1), two.rho_ee);
        }
    }

    #[test]
    fn degenerate_doublet_is_a_two_level_atom() {
        // bright state (|1>+|2>)/sqrt2 couples with sqrt2 * rabi and decays at
        // gamma (1 + p); the dark state is undriven and decays at gamma (1 - p)
        let atom = AtomParams::default();
        let scheme = VTypeScheme {
            p: 0.8,
            ..VTypeScheme::for_atom(&atom).with_split(0.0)
        };
        let bright = AtomParams {
            gamma_pop: scheme.gamma * (1.0 + scheme.p),
            ..atom
        };
        let emitter = Emitter::VType(scheme);
        for (det, rabi) in [(0.0, 2.0), (3.0, 5.0), (-7.0, 10.0)] {
            let drive = DriveParams::new(det, rabi);
            let sys = emitter.system(&drive).unwrap();
            let rate = sys.emission_rate(&sys.steady_state().unwrap());
            let two = two_level_steady(
                &DriveParams::new(det, rabi * std::f64::consts::SQRT_2),
                &bright,
            )
            .unwrap();
            assert!((rate - bright.gamma_pop * two.rho_ee).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_doublet_with_full_interference_is_singular() {
        // undriven, undamped dark state: the stationary state is not unique
        let scheme = VTypeScheme::default().with_split(0.0);
        let err = vtype_steady(&scheme, &DriveParams::new(1.0, 2.0)).unwrap_err();
        assert!(matches!(err, crate::error::Error::Singular { .. }));
    }

    #[test]
    fn ground_doublet_extension_is_a_valid_state() {
        let scheme = VTypeScheme {
            ground_split: Some(0.5),
            ..VTypeScheme::default()
        };
        let rho = vtype_steady(&scheme, &DriveParams::new(0.3, 3.0)).unwrap();
        assert_eq!(rho.dim(), 4);
        assert!((rho.trace().re - 1.0).abs() < 1e-9);
        assert!(rho.hermiticity_defect() < 1e-12);
        assert!(rho.population(2) + rho.population(3) > 0.0);
    }

    #[test]
    fn rejects_invalid_scheme() {
        let bad = VTypeScheme {
            p: 1.5,
            ..VTypeScheme::default()
        };
        assert!(vtype_steady(&bad, &DriveParams::resonant(1.0)).is_err());
    }

    proptest! {
        #[test]
        fn steady_state_is_a_density_matrix(
            split in 0.05f64..10.0,
            p in 0.0f64..=1.0,
            ratio in 0.2f64..2.0,
            rabi in 0.0f64..20.0,
            det in -20.0f64..20.0,
        ) {
            let scheme = VTypeScheme { delta_split: split, p, drive_ratio: ratio, ..VTypeScheme::default() };
            let rho = vtype_steady(&scheme, &DriveParams::new(det, rabi)).unwrap();
            prop_assert!((rho.trace().re - 1.0).abs() < 1e-9);
            prop_assert!(rho.trace().im.abs() < 1e-12);
            prop_assert!(rho.hermiticity_defect() < 1e-12);
            for k in 0..3 {
                prop_assert!(rho.population(k) > -1e-12 && rho.population(k) < 1.0 + 1e-12);
            }
        }
    }
}
