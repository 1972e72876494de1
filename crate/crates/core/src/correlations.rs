//! Second-order photon correlations via the quantum regression theorem, the
//! N-atom coincidence model, and oscillation-frequency extraction.

use std::io::Write;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::bloch::{DensityMatrix, Emitter};
use crate::curves::write_columns;
use crate::error::{ensure_nonnegative, ensure_positive, Error, Result};
use crate::params::{ns_to_us, DriveParams};

/// Normalized intensity correlation sampled at non-negative delays (ns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Curve {
    pub delays: Vec<f64>,
    pub values: Vec<f64>,
}

impl G2Curve {
    /// Value at |delay| by linear interpolation; 1 beyond the last sample.
    pub fn at(&self, delay: f64) -> f64 {
        crate::curves::interpolate(&self.delays, &self.values, delay.abs()).unwrap_or(1.0)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_columns(w, ["delay_ns", "g2"], &self.delays, &self.values)
    }
}

/// g2(tau) for a single emitter: the state right after a photon emission,
/// J[rho_ss] / Tr J[rho_ss] with J[rho] = Sum_c C rho C^dagger, is evolved
/// with the master equation and the emission rate is read off relative to
/// its stationary value. For the two-level and V-type models that state is
/// exactly the ground level.
pub fn g2_curve(emitter: &Emitter, drive: &DriveParams, delays_ns: &[f64]) -> Result<G2Curve> {
    let sys = emitter.system(drive)?;
    let steady = sys.steady_state()?;
    let rate = sys.emission_rate(&steady);
    if !(rate > 0.0) {
        return Err(Error::Domain(
            "g2 undefined: stationary emission rate is zero".into(),
        ));
    }
    let n = sys.dim();
    let jumped = sys.jumps().iter().fold(
        nalgebra::DMatrix::zeros(n, n),
        |acc, j| acc + &j.op * steady.matrix() * j.op.adjoint(),
    );
    let post_jump = DensityMatrix::from_matrix(jumped / num_complex::Complex64::new(rate, 0.0));
    let times: Vec<f64> = delays_ns.iter().map(|&t| ns_to_us(t)).collect();
    let traj = sys.evolve(&post_jump, &times)?;
    let values = traj
        .iter()
        .map(|rho| (sys.emission_rate(rho) / rate).max(0.0))
        .collect();
    Ok(G2Curve {
        delays: delays_ns.to_vec(),
        values,
    })
}

/// Coincidences from N independent identical emitters observed together:
/// amplitude * [N g2(tau) + N (N - 1)] + background.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceModel {
    pub n_atoms: u32,
    pub amplitude: f64,
    pub background: f64,
}

impl CoincidenceModel {
    pub fn validate(&self) -> Result<()> {
        if self.n_atoms < 1 {
            return Err(Error::InvalidParameter {
                name: "n_atoms",
                reason: "must be >= 1".into(),
            });
        }
        ensure_positive("amplitude", self.amplitude)?;
        ensure_nonnegative("background", self.background)
    }

    #[inline]
    pub fn eval(&self, g2: f64) -> f64 {
        let n = f64::from(self.n_atoms);
        self.amplitude * (n * g2 + n * (n - 1.0)) + self.background
    }

    /// Zero-delay value over the large-delay plateau for a curve with
    /// g2(0) = 0.
    pub fn normalized_dip(&self) -> f64 {
        self.eval(0.0) / self.eval(1.0)
    }
}

pub fn n_atom_model(g2: &G2Curve, model: &CoincidenceModel) -> Vec<f64> {
    g2.values.iter().map(|&v| model.eval(v)).collect()
}

/// Minimum peak-to-median ratio of the transform magnitude for a component
/// to count as an oscillation.
const NOISE_FLOOR_RATIO: f64 = 8.0;
const ZERO_PAD: usize = 32;

/// Frequency (MHz) of the dominant oscillation of `values - 1` over the
/// samples whose delay (ns, uniform spacing) lies in `window`.
pub fn dominant_oscillation(delays_ns: &[f64], values: &[f64], window: (f64, f64)) -> Result<f64> {
    let picked: Vec<(f64, f64)> = delays_ns
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .collect();
    if picked.len() < 8 {
        return Err(Error::Data(format!(
            "oscillation window holds {} samples, need at least 8",
            picked.len()
        )));
    }
    let dt = picked[1].0 - picked[0].0;
    if !(dt > 0.0) || picked.windows(2).any(|w| ((w[1].0 - w[0].0) - dt).abs() > 1e-6 * dt) {
        return Err(Error::Data("oscillation window must be uniformly sampled".into()));
    }
    let mean = picked.iter().map(|(_, v)| v - 1.0).sum::<f64>() / picked.len() as f64;
    let n_fft = (picked.len() * ZERO_PAD).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = picked
        .iter()
        .map(|(_, v)| Complex::new(v - 1.0 - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n_fft)
        .collect();
    FftPlanner::new().plan_fft_forward(n_fft).process(&mut buf);
    let mags: Vec<f64> = buf[..n_fft / 2].iter().map(|z| z.norm()).collect();

    let (k, &peak) = mags
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let mut sorted = mags[1..].to_vec();
    sorted.sort_by(f64::total_cmp);
    let floor = sorted[sorted.len() / 2];
    let ratio = if floor > 0.0 { peak / floor } else if peak > 0.0 { f64::INFINITY } else { 0.0 };
    if !(peak > 1e-12) || ratio < NOISE_FLOOR_RATIO || k + 1 >= mags.len() {
        return Err(Error::NoOscillation { ratio });
    }
    let (a, b, c) = (mags[k - 1], mags[k], mags[k + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    // cycles per ns -> MHz
    Ok((k as f64 + shift) / (n_fft as f64 * dt) * 1e3)
}
