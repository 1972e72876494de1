use rayon::prelude::*;

use super::Emitter;
use crate::curves::Spectrum;
use crate::error::{Error, Result};
use crate::params::DriveParams;

/// Steady-state photon emission rate (1/us) on a detuning grid (MHz) at a
/// fixed Rabi frequency (MHz). For the two-level atom this is Gamma*rho_ee;
/// for the V-type scheme it includes the cross-damping coherence term.
pub fn excitation_spectrum(emitter: &Emitter, rabi: f64, detunings: &[f64]) -> Result<Spectrum> {
    emitter.validate()?;
    let values = detunings
        .par_iter()
        .map(|&det| {
            let sys = emitter.system(&DriveParams::new(det, rabi))?;
            let rho = sys.steady_state()?;
            // roundoff can leave -1e-17 at a perfect dark resonance
            Ok(sys.emission_rate(&rho).max(0.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    Spectrum::new(detunings.to_vec(), values)
}

/// Full width at half maximum above the baseline (smaller edge value), from
/// the outermost linearly interpolated half-level crossings.
pub fn spectral_fwhm(spec: &Spectrum) -> Result<f64> {
    let x = spec.detunings();
    let y = spec.values();
    let n = y.len();
    if n < 3 {
        return Err(Error::NoPeak("need at least three samples".into()));
    }
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let baseline = y[0].min(y[n - 1]);
    let height = ymax - baseline;
    if !(height > 1e-12 * ymax.abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::NoPeak("spectrum is flat".into()));
    }
    if imax == 0 || imax == n - 1 {
        return Err(Error::NoPeak("maximum lies on the grid edge".into()));
    }
    let half = baseline + 0.5 * height;
    let left = (0..=imax).find(|&i| y[i] >= half).expect("max above half");
    let right = (imax..n).rev().find(|&i| y[i] >= half).expect("max above half");
    if left == 0 || right == n - 1 {
        return Err(Error::NoPeak("half-maximum crossing lies outside the grid".into()));
    }
    let cross = |i0: usize, i1: usize| x[i0] + (half - y[i0]) * (x[i1] - x[i0]) / (y[i1] - y[i0]);
    Ok(cross(right, right + 1) - cross(left - 1, left))
}

/// Shape of a dip between two maxima around a chosen detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipMetrics {
    /// Detuning of the dip minimum, MHz.
    pub center: f64,
    pub min_value: f64,
    /// Lower of the two flanking maxima.
    pub peak_value: f64,
    /// peak_value - min_value, in signal units.
    pub depth: f64,
    /// depth / peak_value.
    pub contrast: f64,
    /// Full width at half depth, MHz.
    pub width: f64,
}

/// Locates the local minimum nearest `around` and measures it against the
/// maxima on either side. Returns `None` when `around` sits on a maximum.
pub fn dip_metrics(spec: &Spectrum, around: f64) -> Option<DipMetrics> {
    let x = spec.detunings();
    let y = spec.values();
    let n = y.len();
    if n < 3 {
        return None;
    }
    let mut c = x.partition_point(|&v| v < around).min(n - 1);
    if c > 0 && (x[c - 1] - around).abs() < (x[c] - around).abs() {
        c -= 1;
    }
    // slide to the local minimum
    while c > 0 && y[c - 1] < y[c] {
        c -= 1;
    }
    while c + 1 < n && y[c + 1] < y[c] {
        c += 1;
    }
    let mut l = c;
    while l > 0 && y[l - 1] >= y[l] {
        l -= 1;
    }
    let mut r = c;
    while r + 1 < n && y[r + 1] >= y[r] {
        r += 1;
    }
    if l == c || r == c {
        return None;
    }
    let peak_value = y[l].min(y[r]);
    let depth = peak_value - y[c];
    if depth <= 0.0 {
        return None;
    }
    let level = y[c] + 0.5 * depth;
    let left = (l..=c).rev().find(|&i| y[i] >= level)?;
    let right = (c..=r).find(|&i| y[i] >= level)?;
    let cross = |i0: usize, i1: usize| x[i0] + (level - y[i0]) * (x[i1] - x[i0]) / (y[i1] - y[i0]);
    let width = cross(right - 1, right) - cross(left, left + 1);
    Some(DipMetrics {
        center: x[c],
        min_value: y[c],
        peak_value,
        depth,
        contrast: depth / peak_value,
        width,
    })
}
