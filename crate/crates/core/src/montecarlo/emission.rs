use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng;
use super::stream::PhotonStream;
use crate::bloch::Emitter;
use crate::error::{ensure_positive, Error, Result};
use crate::params::{us_to_ns, DriveParams};

/// Finest tabulation step of the no-jump evolution, us.
const MAX_TABLE_STEP: f64 = 5e-5;
const MAX_TABLE_POINTS: usize = 1 << 17;
/// Survival probability below which the table stops.
const SURVIVAL_FLOOR: f64 = 1e-13;

/// No-jump evolution from one reset level, tabulated on a uniform grid.
#[derive(Debug, Clone)]
struct WaitingTable {
    dim: usize,
    step: f64,
    survival: Vec<f64>,
    /// Unnormalized no-jump states, `dim` amplitudes per grid point.
    psi: Vec<Complex64>,
    /// Asymptotic decay rate of the survival beyond the table (1/us);
    /// zero when the atom is trapped and never emits again.
    tail_rate: f64,
}

impl WaitingTable {
    fn build(h_eff: &DMatrix<Complex64>, level: usize, step: f64) -> Self {
        let dim = h_eff.nrows();
        let u = (h_eff * Complex64::new(0.0, -step)).exp();
        let mut state = DVector::<Complex64>::zeros(dim);
        state[level] = Complex64::new(1.0, 0.0);
        let mut survival = vec![1.0];
        let mut psi: Vec<Complex64> = state.iter().copied().collect();
        while survival.len() < MAX_TABLE_POINTS && *survival.last().unwrap() >= SURVIVAL_FLOOR {
            state = &u * &state;
            survival.push(state.norm_squared());
            psi.extend(state.iter().copied());
        }
        let n = survival.len();
        let q = n - 1 - (n - 1) / 4;
        let (s_q, s_end) = (survival[q], survival[n - 1]);
        let span = (n - 1 - q) as f64 * step;
        let rate = if span > 0.0 && s_end > 0.0 { (s_q / s_end).ln() / span } else { 0.0 };
        Self {
            dim,
            step,
            survival,
            psi,
            tail_rate: if rate > 1e-12 { rate } else { 0.0 },
        }
    }

    fn end_time(&self) -> f64 {
        (self.survival.len() - 1) as f64 * self.step
    }

    fn point(&self, i: usize) -> &[Complex64] {
        &self.psi[i * self.dim..(i + 1) * self.dim]
    }

    /// Normalized no-jump state a time `tau` after the reset.
    fn state_at(&self, tau: f64) -> DVector<Complex64> {
        let last = self.survival.len() - 1;
        let x = tau / self.step;
        let v = if x >= last as f64 {
            DVector::from_column_slice(self.point(last))
        } else {
            let i = x.floor() as usize;
            let f = x - i as f64;
            let (a, b) = (self.point(i), self.point(i + 1));
            DVector::from_iterator(self.dim, a.iter().zip(b).map(|(a, b)| a * (1.0 - f) + b * f))
        };
        let norm = v.norm();
        if norm > 0.0 {
            v / Complex64::new(norm, 0.0)
        } else {
            v
        }
    }

    /// Waiting time until the next jump for survival threshold `u` in
    /// (0, 1], or `None` if the atom never emits.
    fn waiting_time(&self, u: f64) -> Option<f64> {
        let s = &self.survival;
        let i = s.partition_point(|&v| v >= u);
        if i < s.len() {
            let f = (s[i - 1] - u) / (s[i - 1] - s[i]);
            Some((i as f64 - 1.0 + f) * self.step)
        } else if self.tail_rate > 0.0 {
            Some(self.end_time() + (s[s.len() - 1] / u).ln() / self.tail_rate)
        } else {
            None
        }
    }
}

/// Quantum-jump sampler for one emitter under a fixed drive. Every jump
/// returns the atom to a ground level, so the waiting-time distribution from
/// each ground level is computed once and reused for all jumps.
#[derive(Debug, Clone)]
pub struct JumpSampler {
    n_ground: usize,
    jumps: Vec<(DMatrix<Complex64>, usize)>,
    tables: Vec<WaitingTable>,
}

impl JumpSampler {
    pub fn new(emitter: &Emitter, drive: &DriveParams) -> Result<Self> {
        let sys = emitter.system(drive)?;
        let n_ground = emitter.n_ground();
        if let Some(j) = sys.jumps().iter().find(|j| j.reset_level >= n_ground) {
            return Err(Error::Domain(format!(
                "jump resets to level {} which is not a ground level",
                j.reset_level
            )));
        }
        let step = MAX_TABLE_STEP.min(1.0 / (50.0 * sys.rate_scale()));
        let h_eff = sys.effective_hamiltonian();
        let tables = (0..n_ground)
            .map(|g| WaitingTable::build(&h_eff, g, step))
            .collect();
        let jumps = sys
            .jumps()
            .iter()
            .map(|j| (j.op.clone(), j.reset_level))
            .collect();
        Ok(Self {
            n_ground,
            jumps,
            tables,
        })
    }

    fn initial_level<R: Rng>(&self, rng: &mut R) -> usize {
        if self.n_ground == 1 {
            0
        } else {
            rng.random_range(0..self.n_ground)
        }
    }

    /// Draws the delay to the next emission from ground level `level` and the
    /// level the atom lands in.
    fn next_jump<R: Rng>(&self, level: usize, rng: &mut R) -> Option<(f64, usize)> {
        let table = &self.tables[level];
        let u = 1.0 - rng.random::<f64>();
        let wait = table.waiting_time(u)?;
        let first = self.jumps[0].1;
        if self.jumps.iter().all(|j| j.1 == first) {
            return Some((wait, first));
        }
        let psi = table.state_at(wait);
        let weights: Vec<f64> = self.jumps.iter().map(|(c, _)| (c * &psi).norm_squared()).collect();
        let mut r = rng.random::<f64>() * weights.iter().sum::<f64>();
        for (w, (_, reset)) in weights.iter().zip(&self.jumps) {
            if r < *w {
                return Some((wait, *reset));
            }
            r -= w;
        }
        Some((wait, self.jumps[self.jumps.len() - 1].1))
    }

    /// Emission times (ns) of an atom put in its ground state at `start` and
    /// probed until `end` (both us), appended to `out`.
    pub(crate) fn emit_interval<R: Rng>(&self, start: f64, end: f64, rng: &mut R, out: &mut Vec<f64>) {
        let mut level = self.initial_level(rng);
        let mut t = start;
        while let Some((wait, next)) = self.next_jump(level, rng) {
            t += wait;
            if t >= end {
                break;
            }
            out.push(us_to_ns(t));
            level = next;
        }
    }
}

/// Photon emission times of one atom starting in its ground state, probed
/// for `duration` us. Timestamps are in ns on channel 0.
pub fn simulate_emission(
    emitter: &Emitter,
    drive: &DriveParams,
    duration: f64,
    seed: u64,
) -> Result<PhotonStream> {
    ensure_positive("duration", duration)?;
    let sampler = JumpSampler::new(emitter, drive)?;
    let mut times = Vec::new();
    sampler.emit_interval(0.0, duration, &mut rng::substream(seed, rng::EMISSION, 0), &mut times);
    PhotonStream::on_channel(us_to_ns(duration), times, 0)
}

/// Trajectory average of the excited-state population at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationEstimate {
    /// us.
    pub time: f64,
    pub mean: f64,
    pub std_err: f64,
}

/// Monte-Carlo wavefunction estimate of the total upper-level population at
/// `times` (us, ascending) from `n_traj` trajectories started in level 0.
pub fn excited_population_average(
    emitter: &Emitter,
    drive: &DriveParams,
    times: &[f64],
    n_traj: usize,
    seed: u64,
) -> Result<Vec<PopulationEstimate>> {
    if times.windows(2).any(|w| !(w[1] >= w[0])) || times.first().is_some_and(|&t| !(t >= 0.0)) {
        return Err(Error::Data("checkpoint times must be >= 0 and ascending".into()));
    }
    if n_traj < 2 {
        return Err(Error::InvalidParameter {
            name: "n_traj",
            reason: "need at least two trajectories".into(),
        });
    }
    let sampler = JumpSampler::new(emitter, drive)?;
    let n_ground = sampler.n_ground;
    let per_traj: Vec<Vec<f64>> = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::substream(seed, rng::TRAJECTORY, i);
            let mut pops = Vec::with_capacity(times.len());
            let (mut t_reset, mut level) = (0.0, 0usize);
            let mut next = sampler.next_jump(level, &mut rng);
            for &t in times {
                while let Some((wait, to)) = next {
                    if t_reset + wait > t {
                        break;
                    }
                    t_reset += wait;
                    level = to;
                    next = sampler.next_jump(level, &mut rng);
                }
                let psi = sampler.tables[level].state_at(t - t_reset);
                pops.push(psi.iter().skip(n_ground).map(|z| z.norm_sqr()).sum());
            }
            pops
        })
        .collect();
    let n = n_traj as f64;
    Ok(times
        .iter()
        .enumerate()
        .map(|(k, &time)| {
            let mean = per_traj.iter().map(|p| p[k]).sum::<f64>() / n;
            let var = per_traj.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            PopulationEstimate {
                time,
                mean,
                std_err: (var / n).sqrt(),
            }
        })
        .collect())
}
