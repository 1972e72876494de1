use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Time-tagged photon events (ns) on [0, duration] with a channel tag.
/// Channel 0 is the undetected emission, 1 and 2 the two detectors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhotonStream {
    duration: f64,
    times: Vec<f64>,
    channels: Vec<u8>,
}

impl PhotonStream {
    pub fn new(duration: f64, times: Vec<f64>, channels: Vec<u8>) -> Result<Self> {
        if !(duration >= 0.0) || !duration.is_finite() {
            return Err(Error::Data(format!("stream duration must be >= 0, got {duration}")));
        }
        if times.len() != channels.len() {
            return Err(Error::Data("one channel tag per timestamp required".into()));
        }
        if times.windows(2).any(|w| !(w[1] >= w[0])) {
            return Err(Error::Data("timestamps must be sorted".into()));
        }
        if times.first().is_some_and(|&t| !(t >= 0.0)) || times.last().is_some_and(|&t| t > duration) {
            return Err(Error::Data("timestamps must lie inside the stream duration".into()));
        }
        Ok(Self {
            duration,
            times,
            channels,
        })
    }

    /// Single-channel stream from already sorted times.
    pub fn on_channel(duration: f64, times: Vec<f64>, channel: u8) -> Result<Self> {
        let channels = vec![channel; times.len()];
        Self::new(duration, times, channels)
    }

    pub(crate) fn from_sorted_unchecked(duration: f64, times: Vec<f64>, channels: Vec<u8>) -> Self {
        debug_assert!(times.windows(2).all(|w| w[1] >= w[0]));
        Self {
            duration,
            times,
            channels,
        }
    }

    pub fn empty(duration: f64) -> Self {
        Self {
            duration,
            ..Self::default()
        }
    }

    /// ns.
    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn channels(&self) -> &[u8] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Events per ns.
    pub fn rate(&self) -> f64 {
        if self.duration > 0.0 {
            self.len() as f64 / self.duration
        } else {
            0.0
        }
    }

    /// Sorted union of two streams; ties keep `self` first.
    pub fn merge(&self, other: &PhotonStream) -> PhotonStream {
        let mut times = Vec::with_capacity(self.len() + other.len());
        let mut channels = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.len() || j < other.len() {
            let take_self = j >= other.len() || (i < self.len() && self.times[i] <= other.times[j]);
            if take_self {
                times.push(self.times[i]);
                channels.push(self.channels[i]);
                i += 1;
            } else {
                times.push(other.times[j]);
                channels.push(other.channels[j]);
                j += 1;
            }
        }
        Self::from_sorted_unchecked(self.duration.max(other.duration), times, channels)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["time_ns", "channel"])?;
        for (t, c) in self.times.iter().zip(&self.channels) {
            out.write_record([t.to_string(), c.to_string()])?;
        }
        out.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }

    /// Reads `time_ns,channel` rows; the duration is taken as the last
    /// timestamp unless given.
    pub fn read_csv<R: Read>(r: R, duration: Option<f64>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "time_ns" || &headers[1] != "channel" {
            return Err(Error::Csv("expected header `time_ns,channel`".into()));
        }
        let mut times = Vec::new();
        let mut channels = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |e: String| Error::Csv(format!("row {}: {e}", line + 1));
            times.push(rec[0].parse::<f64>().map_err(|e| bad(e.to_string()))?);
            channels.push(rec[1].parse::<u8>().map_err(|e| bad(e.to_string()))?);
        }
        let duration = duration.unwrap_or_else(|| times.last().copied().unwrap_or(0.0));
        Self::new(duration, times, channels)
    }
}
