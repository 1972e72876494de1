//! Units, physical constants and atomic/drive parameters.
//!
//! Every externally visible frequency is an ordinary frequency in MHz and
//! every time is in microseconds unless a name says otherwise (`_ns`).
//! Dynamical rates used inside the solvers are angular, in rad/us. Since
//! 1 MHz = 1 cycle/us, converting between the two is a factor of 2*pi.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_nonnegative, ensure_positive, Error, Result};

/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;
/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Cs-133 atomic mass, kg.
pub const CS_MASS: f64 = 2.207e-25;
/// Cs ground-state static polarizability, C m^2 / V.
pub const CS_POLARIZABILITY: f64 = 6.6e-39;

/// Ordinary frequency (MHz) to angular rate (rad/us).
#[inline]
pub fn mhz_to_angular(f_mhz: f64) -> f64 {
    2.0 * PI * f_mhz
}

/// Angular rate (rad/us) to ordinary frequency (MHz).
#[inline]
pub fn angular_to_mhz(w: f64) -> f64 {
    w / (2.0 * PI)
}

#[inline]
pub fn ns_to_us(t_ns: f64) -> f64 {
    t_ns * 1e-3
}

#[inline]
pub fn us_to_ns(t_us: f64) -> f64 {
    t_us * 1e3
}

/// Atomic constants for the driven transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomParams {
    /// Population decay rate, 1/us.
    pub gamma_pop: f64,
    /// Saturation intensity, mW/cm^2.
    pub i_sat: f64,
    /// Mass, kg.
    pub mass: f64,
    /// Static polarizability, C m^2 / V.
    pub alpha_pol: f64,
    /// Ground-state vdW coefficient C3/h, kHz um^3.
    pub c3_ground: f64,
    /// Excited-state vdW coefficient C3/h, kHz um^3.
    pub c3_excited: f64,
}

impl Default for AtomParams {
    fn default() -> Self {
        Self {
            gamma_pop: 1.0 / 0.030,
            i_sat: 1.1,
            mass: CS_MASS,
            alpha_pol: CS_POLARIZABILITY,
            c3_ground: 1.2,
            c3_excited: 2.2,
        }
    }
}

impl AtomParams {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("atom.gamma_pop", self.gamma_pop)?;
        ensure_positive("atom.i_sat", self.i_sat)?;
        ensure_positive("atom.mass", self.mass)?;
        ensure_positive("atom.alpha_pol", self.alpha_pol)?;
        ensure_positive("atom.c3_ground", self.c3_ground)?;
        ensure_positive("atom.c3_excited", self.c3_excited)?;
        if self.c3_excited < self.c3_ground {
            return Err(Error::InvalidParameter {
                name: "atom.c3_excited",
                reason: format!(
                    "must be >= c3_ground ({}) to give a red shift, got {}",
                    self.c3_ground, self.c3_excited
                ),
            });
        }
        Ok(())
    }

    /// Natural linewidth (FWHM) in MHz.
    pub fn linewidth_mhz(&self) -> f64 {
        angular_to_mhz(self.gamma_pop)
    }

    /// Differential vdW coefficient, kHz um^3.
    pub fn delta_c3(&self) -> f64 {
        self.c3_excited - self.c3_ground
    }
}

/// Laser drive: detuning from the free-atom (or doublet-midpoint) resonance
/// and Rabi frequency, both ordinary frequencies in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveParams {
    pub detuning: f64,
    pub rabi: f64,
}

impl Default for DriveParams {
    fn default() -> Self {
        Self {
            detuning: 0.0,
            rabi: 13.0,
        }
    }
}

impl DriveParams {
    pub fn new(detuning: f64, rabi: f64) -> Self {
        Self { detuning, rabi }
    }

    pub fn resonant(rabi: f64) -> Self {
        Self::new(0.0, rabi)
    }

    pub fn with_detuning(self, detuning: f64) -> Self {
        Self { detuning, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_nonnegative("drive.rabi", self.rabi)?;
        if !self.detuning.is_finite() {
            return Err(Error::InvalidParameter {
                name: "drive.detuning",
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }

    /// Angular Rabi frequency, rad/us.
    pub fn rabi_angular(&self) -> f64 {
        mhz_to_angular(self.rabi)
    }

    /// Angular detuning, rad/us.
    pub fn detuning_angular(&self) -> f64 {
        mhz_to_angular(self.detuning)
    }
}

/// Rabi frequency (MHz) produced by a probe of `intensity` (mW/cm^2).
///
/// `scale` is an empirical reduction factor in (0, 1]; experiments that
/// report Rabi frequencies "k times smaller" than the two-level estimate
/// correspond to `scale = 1/k`.
pub fn rabi_from_intensity(intensity: f64, atom: &AtomParams, scale: f64) -> Result<f64> {
    if !(intensity >= 0.0) || !intensity.is_finite() {
        return Err(Error::Domain(format!(
            "intensity must be finite and >= 0, got {intensity}"
        )));
    }
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::Domain(format!("rabi scale must lie in (0, 1], got {scale}")));
    }
    Ok(scale * atom.linewidth_mhz() * (intensity / (2.0 * atom.i_sat)).sqrt())
}
