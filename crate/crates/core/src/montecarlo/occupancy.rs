use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::emission::JumpSampler;
use super::rng;
use super::stream::PhotonStream;
use crate::bloch::Emitter;
use crate::error::{ensure_nonnegative, ensure_positive, Error, Result};
use crate::params::{us_to_ns, DriveParams};

/// How many atoms sit in the observation volume and for how long.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OccupancyModel {
    /// Poisson arrivals (atoms/us), each staying an exponential time with
    /// mean `dwell_mean` (us). Arrivals stop while the probe is on unless
    /// `feed_during_probe` is set.
    Poisson {
        arrival_rate: f64,
        dwell_mean: f64,
        #[serde(default)]
        feed_during_probe: bool,
    },
    /// A constant number of atoms present for the whole run.
    Fixed { atoms: u32 },
}

impl Default for OccupancyModel {
    fn default() -> Self {
        Self::poisson_with_mean(1.0, 180.0)
    }
}

impl OccupancyModel {
    /// Poisson model whose stationary mean occupancy is `mean`.
    pub fn poisson_with_mean(mean: f64, dwell_mean: f64) -> Self {
        OccupancyModel::Poisson {
            arrival_rate: mean / dwell_mean,
            dwell_mean,
            feed_during_probe: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            OccupancyModel::Poisson {
                arrival_rate,
                dwell_mean,
                ..
            } => {
                ensure_nonnegative("occupancy.arrival_rate", arrival_rate)?;
                ensure_positive("occupancy.dwell_mean", dwell_mean)
            }
            OccupancyModel::Fixed { .. } => Ok(()),
        }
    }

    /// Stationary mean atom number with continuous loading.
    pub fn mean_occupancy(&self) -> f64 {
        match *self {
            OccupancyModel::Poisson {
                arrival_rate,
                dwell_mean,
                ..
            } => arrival_rate * dwell_mean,
            OccupancyModel::Fixed { atoms } => f64::from(atoms),
        }
    }

    /// Presence intervals [arrival, departure) in us, clipped to the run.
    /// The run starts from the stationary population, and later arrivals
    /// follow the loading windows of `gating`.
    pub fn atom_intervals(&self, gating: &GatingConfig, duration: f64, seed: u64) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        gating.validate()?;
        ensure_positive("duration", duration)?;
        let (arrival_rate, dwell_mean, feed) = match *self {
            OccupancyModel::Fixed { atoms } => return Ok(vec![(0.0, duration); atoms as usize]),
            OccupancyModel::Poisson {
                arrival_rate,
                dwell_mean,
                feed_during_probe,
            } => (arrival_rate, dwell_mean, feed_during_probe),
        };
        if arrival_rate == 0.0 {
            return Ok(Vec::new());
        }
        let mut rng = rng::substream(seed, rng::ARRIVALS, 0);
        let dwell = Exp::new(1.0 / dwell_mean).map_err(|e| Error::Domain(e.to_string()))?;
        let mut arrivals = Vec::new();
        let initial = poisson(arrival_rate * dwell_mean, &mut rng)?;
        arrivals.extend(std::iter::repeat_n(0.0, initial as usize));
        let feeding: Vec<(f64, f64)> = if feed {
            vec![(0.0, duration)]
        } else {
            gating.loading_periods(duration).collect()
        };
        for (a, b) in feeding {
            let n = poisson(arrival_rate * (b - a), &mut rng)?;
            let mut times: Vec<f64> = (0..n).map(|_| rng.random_range(a..b)).collect();
            times.sort_by(f64::total_cmp);
            arrivals.extend(times);
        }
        Ok(arrivals
            .into_iter()
            .map(|t| (t, (t + dwell.sample(&mut rng)).min(duration)))
            .collect())
    }
}

fn poisson<R: Rng>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(d.sample(rng) as u64)
}

/// MOT gating in us. Each cycle starts with the MOT on (loading) for
/// `cycle_period - off_period`, followed by the probe window of length
/// `off_period`. `off_period == cycle_period` means a continuous probe.
/// The detection gate opens `gate_delay` after the start of the probe window
/// and stays open for `gate_width`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatingConfig {
    pub off_period: f64,
    pub cycle_period: f64,
    pub gate_delay: f64,
    pub gate_width: f64,
}

impl Default for GatingConfig {
    fn default() -> Self {
        Self {
            off_period: 10.0,
            cycle_period: 200.0,
            gate_delay: 0.0,
            gate_width: 10.0,
        }
    }
}

impl GatingConfig {
    pub fn continuous() -> Self {
        Self {
            off_period: 1.0,
            cycle_period: 1.0,
            gate_delay: 0.0,
            gate_width: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("gating.off_period", self.off_period)?;
        ensure_positive("gating.cycle_period", self.cycle_period)?;
        ensure_nonnegative("gating.gate_delay", self.gate_delay)?;
        ensure_positive("gating.gate_width", self.gate_width)?;
        if self.off_period > self.cycle_period {
            return Err(Error::InvalidParameter {
                name: "gating.off_period",
                reason: format!(
                    "probe window {} us exceeds cycle period {} us",
                    self.off_period, self.cycle_period
                ),
            });
        }
        if self.gate_delay + self.gate_width > self.off_period * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter {
                name: "gating.gate_width",
                reason: "detection gate must lie inside the probe window".into(),
            });
        }
        Ok(())
    }

    pub fn is_continuous(&self) -> bool {
        self.off_period >= self.cycle_period
    }

    fn on_period(&self) -> f64 {
        self.cycle_period - self.off_period
    }

    /// Probe windows of cycle `k`.
    pub fn probe_window(&self, k: u64) -> (f64, f64) {
        let start = k as f64 * self.cycle_period;
        (start + self.on_period(), start + self.cycle_period)
    }

    /// Probe windows intersecting [from, to), clipped to it.
    pub fn probe_windows(&self, from: f64, to: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let continuous = self.is_continuous();
        let first = if continuous { 0 } else { (from / self.cycle_period).floor().max(0.0) as u64 };
        let mut k = first;
        let mut done = !(to > from);
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            if continuous {
                done = true;
                return Some((from, to));
            }
            loop {
                let (a, b) = self.probe_window(k);
                k += 1;
                if a >= to {
                    done = true;
                    return None;
                }
                if b > from {
                    return Some((a.max(from), b.min(to)));
                }
            }
        })
    }

    /// MOT-on intervals over [0, duration).
    fn loading_periods(&self, duration: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let on = self.on_period();
        let n = if on > 0.0 { (duration / self.cycle_period).ceil() as u64 } else { 0 };
        (0..n).filter_map(move |k| {
            let a = k as f64 * self.cycle_period;
            let b = (a + on).min(duration);
            (b > a).then_some((a, b))
        })
    }

    /// True when `t` (us) lies in a probe window.
    pub fn probe_on(&self, t: f64) -> bool {
        self.is_continuous() || t.rem_euclid(self.cycle_period) >= self.on_period()
    }
}

/// Photons from all atoms present during the probe windows of a run of
/// `duration` us, merged into one channel-0 stream. Atoms are put back in
/// the ground state at the start of every probe window.
pub fn apply_occupancy_and_gating(
    emitter: &Emitter,
    drive: &DriveParams,
    occupancy: &OccupancyModel,
    gating: &GatingConfig,
    duration: f64,
    seed: u64,
) -> Result<PhotonStream> {
    let intervals = occupancy.atom_intervals(gating, duration, seed)?;
    if intervals.is_empty() {
        return Ok(PhotonStream::empty(us_to_ns(duration)));
    }
    let sampler = JumpSampler::new(emitter, drive)?;
    let per_atom: Vec<Vec<f64>> = intervals
        .par_iter()
        .enumerate()
        .map(|(j, &(a, d))| {
            let mut rng = rng::substream(seed, rng::EMISSION, j as u64);
            let mut out = Vec::new();
            for (ws, we) in gating.probe_windows(a, d) {
                sampler.emit_interval(ws, we, &mut rng, &mut out);
            }
            out
        })
        .collect();
    let mut times: Vec<f64> = per_atom.into_iter().flatten().collect();
    times.par_sort_unstable_by(f64::total_cmp);
    let n = times.len();
    Ok(PhotonStream::from_sorted_unchecked(us_to_ns(duration), times, vec![0; n]))
}
