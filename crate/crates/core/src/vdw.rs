//! Atom-surface van der Waals level shifts and the line shape of atoms
//! spread over a range of distances from the fiber surface.

use serde::{Deserialize, Serialize};

use crate::curves::{trapezoid, Spectrum};
use crate::error::{ensure_positive, Error, Result};
use crate::params::AtomParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VdwConfig {
    /// Excited minus ground C3 coefficient over h, kHz um^3.
    pub delta_c3: f64,
    /// Decay length of the detection weight exp(-d / coupling_length), nm.
    pub coupling_length: f64,
}

impl Default for VdwConfig {
    fn default() -> Self {
        Self::for_atom(&AtomParams::default())
    }
}

impl VdwConfig {
    pub fn for_atom(atom: &AtomParams) -> Self {
        Self {
            delta_c3: atom.delta_c3(),
            coupling_length: 100.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("vdw.delta_c3", self.delta_c3)?;
        ensure_positive("vdw.coupling_length", self.coupling_length)
    }
}

/// Line shift (MHz) of an atom at `d` nm from the surface; always red.
pub fn vdw_shift(d: f64, cfg: &VdwConfig) -> Result<f64> {
    cfg.validate()?;
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain(format!("surface distance must be > 0 nm, got {d}")));
    }
    let d_um = d * 1e-3;
    // kHz -> MHz
    Ok(-cfg.delta_c3 / (d_um * d_um * d_um) * 1e-3)
}

/// Distance (nm) at which the shift equals `shift` (MHz, negative).
pub fn distance_for_shift(shift: f64, cfg: &VdwConfig) -> Result<f64> {
    cfg.validate()?;
    if !(shift < 0.0) || !shift.is_finite() {
        return Err(Error::Domain(format!(
            "van der Waals shifts are red (< 0 MHz), got {shift}"
        )));
    }
    Ok((cfg.delta_c3 * 1e-3 / -shift).cbrt() * 1e3)
}

/// Discrete distribution of atom-surface distances (nm), weights summing
/// to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceDistribution {
    support: Vec<f64>,
    weights: Vec<f64>,
}

impl DistanceDistribution {
    /// Normalizes `weights` to unit sum.
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(Error::Data("distance distribution needs one weight per distance".into()));
        }
        if support.iter().any(|d| !(*d > 0.0) || !d.is_finite()) {
            return Err(Error::Data("distances must be positive".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Data("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Data("weights sum to zero".into()));
        }
        Ok(Self {
            support,
            weights: weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn delta(d: f64) -> Result<Self> {
        Self::new(vec![d], vec![1.0])
    }

    /// Equal weights on `n` points spanning [lo, hi] nm.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(hi >= lo) || n == 0 {
            return Err(Error::Data(format!("bad uniform range [{lo}, {hi}] with {n} points")));
        }
        Self::new(crate::curves::linspace(lo, hi, n), vec![1.0; n])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Keeps only distances >= `min_d`, renormalized.
    pub fn restricted(&self, min_d: f64) -> Result<Self> {
        let (s, w): (Vec<f64>, Vec<f64>) = self
            .support
            .iter()
            .zip(&self.weights)
            .filter(|(d, _)| **d >= min_d)
            .map(|(d, w)| (*d, *w))
            .unzip();
        Self::new(s, w)
    }
}

/// Area-normalized Lorentzian with full width `fwhm`.
fn lorentzian(x: f64, fwhm: f64) -> f64 {
    let g = 0.5 * fwhm;
    g / (std::f64::consts::PI * (x * x + g * g))
}

/// Mixture of natural-width Lorentzians at the shift of each distance,
/// weighted by probability times detection weight, with unit total area.
fn mixture(dist: &DistanceDistribution, cfg: &VdwConfig, natural_width: f64, grid: &[f64]) -> Result<Vec<f64>> {
    let mut comps = Vec::with_capacity(dist.support.len());
    for (&d, &w) in dist.support.iter().zip(&dist.weights) {
        comps.push((vdw_shift(d, cfg)?, w * (-d / cfg.coupling_length).exp()));
    }
    let total: f64 = comps.iter().map(|c| c.1).sum();
    if !(total > 0.0) {
        return Err(Error::Domain("all distances carry zero detection weight".into()));
    }
    Ok(grid
        .iter()
        .map(|&x| comps.iter().map(|(s, w)| w * lorentzian(x - s, natural_width)).sum::<f64>() / total)
        .collect())
}

/// Fluorescence line shape of atoms distributed over `dist`, normalized to
/// unit trapezoid area on `grid` (detuning, MHz).
pub fn surface_line_shape(
    dist: &DistanceDistribution,
    cfg: &VdwConfig,
    natural_width: f64,
    grid: &[f64],
) -> Result<Spectrum> {
    ensure_positive("natural_width", natural_width)?;
    let raw = mixture(dist, cfg, natural_width, grid)?;
    let area = trapezoid(grid, &raw);
    if !(area > 0.0) {
        return Err(Error::Data("detuning grid holds no spectral weight".into()));
    }
    Spectrum::new(grid.to_vec(), raw.iter().map(|v| v / area).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::spectral_fwhm;
    use crate::curves::linspace;
    use proptest::prelude::*;

    const GAMMA: f64 = 5.305;

    fn cfg() -> VdwConfig {
        VdwConfig {
            delta_c3: 1.0,
            coupling_length: 100.0,
        }
    }

    #[test]
    fn closed_form_shifts() {
        assert!((vdw_shift(50.0, &cfg()).unwrap() + 8.0).abs() < 1e-12);
        assert!((distance_for_shift(-8.0, &cfg()).unwrap() - 50.0).abs() < 1e-12);
        assert!((distance_for_shift(-1.0, &cfg()).unwrap() - 100.0).abs() < 1e-12);
        let d15 = distance_for_shift(-15.0, &cfg()).unwrap();
        assert!((d15 - 40.548).abs() < 1e-3, "{d15}");
        assert!(vdw_shift(1e9, &cfg()).unwrap().abs() < 1e-20);
    }

    #[test]
    fn default_uses_atom_coefficients() {
        assert!((VdwConfig::default().delta_c3 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(vdw_shift(0.0, &cfg()), Err(Error::Domain(_))));
        assert!(matches!(vdw_shift(-3.0, &cfg()), Err(Error::Domain(_))));
        assert!(matches!(distance_for_shift(0.0, &cfg()), Err(Error::Domain(_))));
        assert!(matches!(distance_for_shift(2.0, &cfg()), Err(Error::Domain(_))));
    }

    #[test]
    fn far_field_is_natural_lorentzian() {
        let grid = linspace(-40.0, 40.0, 8001);
        let s = surface_line_shape(&DistanceDistribution::delta(10_000.0).unwrap(), &cfg(), GAMMA, &grid)
            .unwrap();
        let peak = s.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        assert!(peak.abs() < 0.01);
        assert!((spectral_fwhm(&s).unwrap() - GAMMA).abs() < 0.05);
    }

    #[test]
    fn prominence_band_stays_narrow() {
        let grid = linspace(-60.0, 30.0, 9001);
        let s = surface_line_shape(&DistanceDistribution::uniform(50.0, 100.0, 501).unwrap(), &cfg(), GAMMA, &grid)
            .unwrap();
        let peak = s.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        assert!(peak.abs() < 4.0, "peak at {peak}");
        let w = spectral_fwhm(&s).unwrap();
        assert!(w <= 15.0, "fwhm {w}");
    }

    #[test]
    fn close_approach_gives_red_tail() {
        let grid = linspace(-300.0, 30.0, 3301);
        let near = surface_line_shape(&DistanceDistribution::uniform(10.0, 100.0, 901).unwrap(), &cfg(), GAMMA, &grid)
            .unwrap();
        let band = surface_line_shape(&DistanceDistribution::uniform(50.0, 100.0, 501).unwrap(), &cfg(), GAMMA, &grid)
            .unwrap();
        for x in [-120.0, -150.0, -250.0] {
            assert!(near.value_at(x) > 10.0 * band.value_at(x), "{x}");
        }
        // red side carries much more weight than the blue side
        let red: f64 = near.iter().filter(|p| p.0 < -20.0).map(|p| p.1).sum();
        let blue: f64 = near.iter().filter(|p| p.0 > 20.0).map(|p| p.1).sum();
        assert!(red > 10.0 * blue);
        // a concentrated band peaks far higher than a spread-out one
        let peak = |s: &Spectrum| s.values().iter().copied().fold(0.0, f64::max);
        assert!(peak(&band) > 1.5 * peak(&near));
    }

    #[test]
    fn normalized_to_unit_area() {
        let grid = linspace(-100.0, 50.0, 1501);
        let s = surface_line_shape(&DistanceDistribution::uniform(30.0, 200.0, 50).unwrap(), &cfg(), GAMMA, &grid)
            .unwrap();
        assert!((s.integral() - 1.0).abs() < 1e-6);
        assert!(s.values().iter().all(|v| *v >= 0.0));
    }

    proptest! {
        #[test]
        fn no_blue_tail(lo in 5.0f64..200.0, span in 0.0f64..300.0, x in GAMMA..500.0) {
            let dist = DistanceDistribution::uniform(lo, lo + span, 40).unwrap();
            let v = mixture(&dist, &cfg(), GAMMA, &[x]).unwrap()[0];
            prop_assert!(v <= lorentzian(x, GAMMA) * (1.0 + 1e-12));
        }

        #[test]
        fn restricting_to_larger_distances_narrows(lo in 20.0f64..80.0, cut in 0.0f64..1.0, span in 20.0f64..150.0) {
            let grid = linspace(-400.0, 100.0, 5001);
            let full = DistanceDistribution::uniform(lo, lo + span, 200).unwrap();
            let part = full.restricted(lo + cut * span * 0.9).unwrap();
            let w_full = spectral_fwhm(&surface_line_shape(&full, &cfg(), GAMMA, &grid).unwrap()).unwrap();
            let w_part = spectral_fwhm(&surface_line_shape(&part, &cfg(), GAMMA, &grid).unwrap()).unwrap();
            prop_assert!(w_part <= w_full + 0.1 + 1e-9, "{w_part} > {w_full}");
        }
    }
}
