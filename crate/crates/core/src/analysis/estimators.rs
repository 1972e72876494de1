//! Order-of-magnitude estimates: atoms in the observation shell, number of
//! localized atoms from integrated intensities, transit times.

use serde::{Deserialize, Serialize};

use crate::curves::Spectrum;
use crate::error::{ensure_nonnegative, ensure_positive, Error, Result};

const BOLTZMANN: f64 = 1.380_649e-23;

/// Cylindrical shell around the fiber in which atoms are detected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// nm.
    pub fiber_radius: f64,
    /// nm.
    pub shell_thickness: f64,
    /// um.
    pub observation_length: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            fiber_radius: 200.0,
            shell_thickness: 200.0,
            observation_length: 100.0,
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("geometry.fiber_radius", self.fiber_radius)?;
        ensure_positive("geometry.shell_thickness", self.shell_thickness)?;
        ensure_positive("geometry.observation_length", self.observation_length)
    }

    /// Shell volume in um^3.
    pub fn shell_volume(&self) -> f64 {
        let r = self.fiber_radius * 1e-3;
        let t = self.shell_thickness * 1e-3;
        std::f64::consts::PI * ((r + t).powi(2) - r * r) * self.observation_length
    }
}

/// Mean number of atoms in the shell for a density in cm^-3.
pub fn mean_atom_number(density: f64, geom: &GeometryConfig) -> Result<f64> {
    ensure_nonnegative("density", density)?;
    geom.validate()?;
    // 1 um^3 = 1e-12 cm^3
    Ok(density * geom.shell_volume() * 1e-12)
}

/// Ratio of two integrated intensities.
pub fn localized_atom_count(integrated_many: f64, integrated_single: f64) -> Result<f64> {
    ensure_positive("integrated_single", integrated_single)?;
    ensure_nonnegative("integrated_many", integrated_many)?;
    Ok(integrated_many / integrated_single)
}

/// [`localized_atom_count`] with each spectrum integrated by the trapezoid
/// rule over its own grid.
pub fn localized_atom_count_from_spectra(many: &Spectrum, single: &Spectrum) -> Result<f64> {
    let (a, b) = (many.integral(), single.integral());
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Data("spectrum integral is not finite".into()));
    }
    localized_atom_count(a, b)
}

/// Time (us) to cross `length` um at `speed` cm/s.
pub fn transit_time(speed: f64, length: f64) -> Result<f64> {
    ensure_positive("speed", speed)?;
    ensure_positive("length", length)?;
    // cm/s -> um/us is a factor 1e-2
    Ok(length / (speed * 1e-2))
}

/// One-dimensional thermal speed sqrt(kT/m), cm/s, for `temperature` in uK
/// and `mass` in kg.
pub fn thermal_speed(temperature: f64, mass: f64) -> Result<f64> {
    ensure_nonnegative("temperature", temperature)?;
    ensure_positive("mass", mass)?;
    Ok((BOLTZMANN * temperature * 1e-6 / mass).sqrt() * 100.0)
}
