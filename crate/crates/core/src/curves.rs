//! Sampled curve containers shared by every module, and their CSV forms.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Signal sampled on an ascending detuning grid (MHz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    detunings: Vec<f64>,
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(detunings: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if detunings.len() != values.len() {
            return Err(Error::Data(format!(
                "spectrum length mismatch: {} detunings, {} values",
                detunings.len(),
                values.len()
            )));
        }
        if detunings.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Data("spectrum detunings must be strictly ascending".into()));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Data(format!("spectrum values must be finite and >= 0, got {v}")));
        }
        Ok(Self { detunings, values })
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.detunings.iter().copied().zip(self.values.iter().copied())
    }

    /// Trapezoid integral over detuning.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.detunings, &self.values)
    }

    /// Linear interpolation; zero outside the grid.
    pub fn value_at(&self, detuning: f64) -> f64 {
        interpolate(&self.detunings, &self.values, detuning).unwrap_or(0.0)
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            detunings: self.detunings.clone(),
            values: self.values.iter().map(|v| v * k).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_columns(w, ["detuning_MHz", "signal"], &self.detunings, &self.values)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let (x, y) = read_columns(r, "detuning_MHz")?;
        Self::new(x, y)
    }
}

/// Coincidence counts in uniform bins centred on k * bin_width (ns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    bin_width: f64,
    /// Number of bins on each side of the zero-delay bin.
    half_bins: usize,
    counts: Vec<u64>,
}

impl Histogram {
    pub fn zeros(bin_width: f64, half_bins: usize) -> Result<Self> {
        if !(bin_width > 0.0) || !bin_width.is_finite() {
            return Err(Error::Data(format!("bin width must be > 0, got {bin_width}")));
        }
        Ok(Self {
            bin_width,
            half_bins,
            counts: vec![0; 2 * half_bins + 1],
        })
    }

    pub fn from_counts(bin_width: f64, counts: Vec<u64>) -> Result<Self> {
        if counts.len().is_multiple_of(2) {
            return Err(Error::Data(format!(
                "a symmetric histogram needs an odd bin count, got {}",
                counts.len()
            )));
        }
        let mut h = Self::zeros(bin_width, counts.len() / 2)?;
        h.counts = counts;
        Ok(h)
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn half_bins(&self) -> usize {
        self.half_bins
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 - self.half_bins as f64) * self.bin_width
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|i| self.center(i)).collect()
    }

    /// Index of the bin containing `delay`, if inside the histogram.
    pub fn bin_of(&self, delay: f64) -> Option<usize> {
        let k = (delay / self.bin_width + 0.5).floor() + self.half_bins as f64;
        if k >= 0.0 && k < self.counts.len() as f64 {
            Some(k as usize)
        } else {
            None
        }
    }

    pub fn add(&mut self, delay: f64) {
        if let Some(i) = self.bin_of(delay) {
            self.counts[i] += 1;
        }
    }

    pub fn zero_bin(&self) -> u64 {
        self.counts[self.half_bins]
    }

    /// Adds another histogram with identical binning.
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.bin_width != other.bin_width || self.half_bins != other.half_bins {
            return Err(Error::Data("cannot merge histograms with different binning".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn scaled(&self, k: u64) -> Self {
        Self {
            counts: self.counts.iter().map(|c| c * k).collect(),
            ..self.clone()
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let centers = self.centers();
        let counts: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        write_columns(w, ["delay_ns", "counts"], &centers, &counts)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let (centers, counts) = read_columns(r, "delay_ns")?;
        if centers.len() < 3 {
            return Err(Error::Data("histogram needs at least three bins".into()));
        }
        let width = centers[1] - centers[0];
        if !(width > 0.0) {
            return Err(Error::Data("histogram delays must ascend".into()));
        }
        let half = counts.len() / 2;
        for (i, c) in centers.iter().enumerate() {
            let expected = (i as f64 - half as f64) * width;
            if (c - expected).abs() > 1e-6 * width.max(1.0) {
                return Err(Error::Data(format!(
                    "histogram bins must be uniform and centred on zero (row {i}: {c})"
                )));
            }
        }
        let counts = counts
            .into_iter()
            .map(|c| {
                if c >= 0.0 && c.fract() == 0.0 {
                    Ok(c as u64)
                } else {
                    Err(Error::Data(format!("counts must be nonnegative integers, got {c}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_counts(width, counts)
    }
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

pub(crate) fn interpolate(x: &[f64], y: &[f64], at: f64) -> Option<f64> {
    if x.is_empty() || at < x[0] || at > x[x.len() - 1] {
        return None;
    }
    let i = x.partition_point(|&v| v <= at);
    if i == 0 {
        return Some(y[0]);
    }
    if i >= x.len() {
        return Some(y[x.len() - 1]);
    }
    let (x0, x1) = (x[i - 1], x[i]);
    let f = (at - x0) / (x1 - x0);
    Some(y[i - 1] + f * (y[i] - y[i - 1]))
}

/// Evenly spaced grid including both ends.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n).map(|i| start + step * i as f64).collect()
        }
    }
}

pub(crate) fn write_columns<W: Write>(
    w: W,
    header: [&str; 2],
    x: &[f64],
    y: &[f64],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for (a, b) in x.iter().zip(y) {
        out.write_record([a.to_string(), b.to_string()])?;
    }
    out.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

pub(crate) fn read_columns<R: Read>(r: R, first_header: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != first_header {
        return Err(Error::Csv(format!(
            "expected header starting with `{first_header}`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::Csv(format!("row {}: missing column {i}", line + 1)))?
                .parse::<f64>()
                .map_err(|e| Error::Csv(format!("row {}: {e}", line + 1)))
        };
        x.push(parse(0)?);
        y.push(parse(1)?);
    }
    Ok((x, y))
}
