use rayon::prelude::*;

use super::stream::PhotonStream;
use crate::curves::Histogram;
use crate::error::{ensure_positive, Result};

const CHUNK: usize = 4096;

/// Histogram of all pairwise delays t2 - t1 (ns) with |t2 - t1| inside the
/// binned range, i.e. a full cross-correlation rather than start-stop.
/// Partial histograms over chunks of `ch1` are merged.
pub fn cross_correlate(
    ch1: &PhotonStream,
    ch2: &PhotonStream,
    bin_width: f64,
    max_delay: f64,
) -> Result<Histogram> {
    ensure_positive("bin_width", bin_width)?;
    ensure_positive("max_delay", max_delay)?;
    let half = (max_delay / bin_width).round() as usize;
    let empty = Histogram::zeros(bin_width, half)?;
    let reach = (half as f64 + 0.5) * bin_width;
    let t2 = ch2.times();
    let partials: Vec<Histogram> = ch1
        .times()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut h = empty.clone();
            let mut lo = t2.partition_point(|&t| t < chunk[0] - reach);
            for &t1 in chunk {
                while lo < t2.len() && t2[lo] < t1 - reach {
                    lo += 1;
                }
                for &t in &t2[lo..] {
                    if t > t1 + reach {
                        break;
                    }
                    h.add(t - t1);
                }
            }
            h
        })
        .collect();
    let mut total = empty;
    for h in &partials {
        total.merge(h)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_single_events_land_in_zero_bin() {
        let a = PhotonStream::on_channel(100.0, vec![42.0], 1).unwrap();
        let b = PhotonStream::on_channel(100.0, vec![42.0], 2).unwrap();
        let h = cross_correlate(&a, &b, 1.0, 10.0).unwrap();
        assert_eq!(h.zero_bin(), 1);
        assert_eq!(h.total(), 1);
    }

    #[test]
    fn counts_every_pair_in_range() {
        let a = PhotonStream::on_channel(100.0, vec![10.0, 20.0], 1).unwrap();
        let b = PhotonStream::on_channel(100.0, vec![8.0, 15.0, 21.0, 60.0], 2).unwrap();
        let h = cross_correlate(&a, &b, 1.0, 12.0).unwrap();
        // 10: -2, +5, +11; 20: -12, -5, +1
        assert_eq!(h.total(), 6);
        for d in [-12.0, -5.0, -2.0, 1.0, 5.0, 11.0] {
            assert_eq!(h.counts()[h.bin_of(d).unwrap()], 1, "{d}");
        }
    }

    #[test]
    fn poisson_streams_give_flat_histogram() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let duration = 1e8;
        let mut draw = |rate: f64| {
            let n = (rate * duration) as usize;
            let mut t: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..duration).floor()).collect();
            t.sort_by(f64::total_cmp);
            t.dedup();
            t
        };
        let (r1, r2) = (1e-3, 2e-3);
        let a = PhotonStream::on_channel(duration, draw(r1), 1).unwrap();
        let b = PhotonStream::on_channel(duration, draw(r2), 2).unwrap();
        let h = cross_correlate(&a, &b, 2.0, 100.0).unwrap();
        let mean = a.rate() * b.rate() * duration * 2.0;
        for &c in h.counts() {
            assert!((c as f64 - mean).abs() < 4.0 * mean.sqrt(), "{c} vs {mean}");
        }
    }

    #[test]
    fn chunked_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut a: Vec<f64> = (0..10_000).map(|_| rng.random_range(0..200_000) as f64).collect();
        let mut b: Vec<f64> = (0..10_000).map(|_| rng.random_range(0..200_000) as f64).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let sa = PhotonStream::on_channel(2e5, a.clone(), 1).unwrap();
        let sb = PhotonStream::on_channel(2e5, b.clone(), 2).unwrap();
        let h = cross_correlate(&sa, &sb, 4.0, 60.0).unwrap();
        let mut brute = Histogram::zeros(4.0, 15).unwrap();
        for x in &a {
            for y in &b {
                brute.add(y - x);
            }
        }
        assert_eq!(h, brute);
    }
}
