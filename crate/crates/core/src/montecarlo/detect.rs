use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rng;
use super::stream::PhotonStream;
use crate::error::{ensure_nonnegative, ensure_positive, ensure_unit_interval, Error, Result};

const CHUNK: usize = 1 << 16;

/// Beamsplitter plus two photon counters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Probability that a detected photon goes to channel 1.
    pub split_ratio: f64,
    /// Uncorrelated background per channel, counts/s.
    pub dark_rate: f64,
    /// Timestamp resolution, ns.
    pub resolution: f64,
    /// Overall probability that an emitted photon is recorded (fiber
    /// coupling, losses and quantum efficiency lumped together).
    pub detection_efficiency: f64,
    /// Per-channel dead time, ns. Zero disables it.
    pub dead_time: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            split_ratio: 0.5,
            dark_rate: 1e3,
            resolution: 1.0,
            detection_efficiency: 1.0,
            dead_time: 0.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        ensure_unit_interval("detector.split_ratio", self.split_ratio)?;
        ensure_nonnegative("detector.dark_rate", self.dark_rate)?;
        ensure_positive("detector.resolution", self.resolution)?;
        ensure_unit_interval("detector.detection_efficiency", self.detection_efficiency)?;
        ensure_nonnegative("detector.dead_time", self.dead_time)
    }
}

/// Routes each photon of `stream` to channel 1 or 2 (or loses it), adds
/// dark counts, and quantizes to the detector resolution. Events that fall
/// in the same resolution bin of one channel are merged into one.
pub fn split_and_detect(
    stream: &PhotonStream,
    det: &DetectorConfig,
    seed: u64,
) -> Result<(PhotonStream, PhotonStream)> {
    det.validate()?;
    let routed: Vec<(Vec<f64>, Vec<f64>)> = stream
        .times()
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(k, chunk)| {
            let mut rng = rng::substream(seed, rng::THINNING, k as u64);
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for &t in chunk {
                let kept = rng.random::<f64>() < det.detection_efficiency;
                let first = rng.random::<f64>() < det.split_ratio;
                if kept {
                    if first { a.push(t) } else { b.push(t) }
                }
            }
            (a, b)
        })
        .collect();
    let (mut ch1, mut ch2) = (Vec::new(), Vec::new());
    for (a, b) in routed {
        ch1.extend(a);
        ch2.extend(b);
    }
    let duration = stream.duration();
    let finish = |signal: Vec<f64>, channel: u8| -> Result<PhotonStream> {
        let dark = dark_counts(det.dark_rate, duration, seed, channel)?;
        let merged = merge_sorted(&signal, &dark);
        let times = quantize(&merged, det.resolution, det.dead_time);
        let n = times.len();
        Ok(PhotonStream::from_sorted_unchecked(duration, times, vec![channel; n]))
    };
    Ok((finish(ch1, 1)?, finish(ch2, 2)?))
}

fn dark_counts(rate_per_s: f64, duration_ns: f64, seed: u64, channel: u8) -> Result<Vec<f64>> {
    let mean = rate_per_s * duration_ns * 1e-9;
    if !(mean > 0.0) {
        return Ok(Vec::new());
    }
    let mut rng = rng::substream(seed, rng::DARK, u64::from(channel));
    let n = Poisson::new(mean)
        .map_err(|e| Error::Domain(e.to_string()))?
        .sample(&mut rng) as usize;
    let mut t: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..duration_ns)).collect();
    t.sort_by(f64::total_cmp);
    Ok(t)
}

fn merge_sorted(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn quantize(times: &[f64], resolution: f64, dead_time: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(times.len());
    for &t in times {
        let q = (t / resolution).floor() * resolution;
        match out.last() {
            Some(&prev) if q == prev || q - prev < dead_time => {}
            _ => out.push(q),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_stream(n: usize, duration: f64) -> PhotonStream {
        let times = (0..n).map(|i| (i as f64 + 0.5) * duration / n as f64).collect();
        PhotonStream::on_channel(duration, times, 0).unwrap()
    }

    #[test]
    fn nothing_detected_without_efficiency_or_darks() {
        let det = DetectorConfig {
            detection_efficiency: 0.0,
            dark_rate: 0.0,
            ..DetectorConfig::default()
        };
        let (a, b) = split_and_detect(&uniform_stream(1000, 1e6), &det, 1).unwrap();
        assert!(a.is_empty() && b.is_empty());
    }

    #[test]
    fn full_split_goes_to_channel_one() {
        let det = DetectorConfig {
            split_ratio: 1.0,
            dark_rate: 0.0,
            ..DetectorConfig::default()
        };
        let (a, b) = split_and_detect(&uniform_stream(1000, 1e6), &det, 1).unwrap();
        assert_eq!(a.len(), 1000);
        assert!(b.is_empty());
        assert!(a.channels().iter().all(|&c| c == 1));
    }

    #[test]
    fn counts_follow_binomial_plus_poisson() {
        let det = DetectorConfig {
            split_ratio: 0.3,
            dark_rate: 2e4,
            detection_efficiency: 0.4,
            ..DetectorConfig::default()
        };
        let n_in = 200_000;
        let duration = 1e9; // 1 s, 5 us spacing: no merging at 1 ns
        let (a, b) = split_and_detect(&uniform_stream(n_in, duration), &det, 17).unwrap();
        for (ch, share) in [(&a, 0.3), (&b, 0.7)] {
            let p = 0.4 * share;
            let dark = det.dark_rate * duration * 1e-9;
            let mean = p * n_in as f64 + dark;
            let var = n_in as f64 * p * (1.0 - p) + dark;
            assert!((ch.len() as f64 - mean).abs() < 3.0 * var.sqrt(), "{} vs {mean}", ch.len());
        }
    }

    #[test]
    fn quantized_merged_and_sorted() {
        let s = PhotonStream::on_channel(10.0, vec![0.2, 0.7, 1.1, 3.99, 4.0], 0).unwrap();
        let det = DetectorConfig {
            split_ratio: 1.0,
            dark_rate: 0.0,
            ..DetectorConfig::default()
        };
        let (a, _) = split_and_detect(&s, &det, 0).unwrap();
        assert_eq!(a.times(), &[0.0, 1.0, 3.0, 4.0]);
        let det = DetectorConfig { dead_time: 3.5, ..det };
        let (a, _) = split_and_detect(&s, &det, 0).unwrap();
        assert_eq!(a.times(), &[0.0, 4.0]);
    }

    #[test]
    fn chunking_is_seed_stable() {
        let s = uniform_stream(3 * CHUNK + 17, 1e8);
        let det = DetectorConfig {
            detection_efficiency: 0.5,
            ..DetectorConfig::default()
        };
        assert_eq!(split_and_detect(&s, &det, 9).unwrap(), split_and_detect(&s, &det, 9).unwrap());
    }
}
