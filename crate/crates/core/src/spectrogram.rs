//! Time-frequency intensity matrix shared by both links and the STFT oracle.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    GlobalMax,
}

/// Non-negative intensity over (frequency row, time column), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    intensity: Vec<f64>,
    freq_axis_hz: Vec<f64>,
    time_axis_s: Vec<f64>,
    normalization: Normalization,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite())
}

impl Spectrogram {
    /// Build from rows (one per frequency). Intensities must be finite and
    /// non-negative; axes strictly increasing and matching the matrix.
    pub fn from_rows(rows: Vec<Vec<f64>>, freq_axis_hz: Vec<f64>, time_axis_s: Vec<f64>) -> Result<Self> {
        if rows.len() != freq_axis_hz.len() {
            return Err(Error::LengthMismatch(rows.len(), freq_axis_hz.len()));
        }
        let n_time = time_axis_s.len();
        let mut intensity = Vec::with_capacity(rows.len() * n_time);
        for r in rows {
            if r.len() != n_time {
                return Err(Error::LengthMismatch(r.len(), n_time));
            }
            intensity.extend(r);
        }
        Self::from_flat(intensity, freq_axis_hz, time_axis_s, Normalization::None)
    }

    fn from_flat(
        intensity: Vec<f64>,
        freq_axis_hz: Vec<f64>,
        time_axis_s: Vec<f64>,
        normalization: Normalization,
    ) -> Result<Self> {
        if freq_axis_hz.is_empty() || time_axis_s.is_empty() {
            return Err(Error::InvalidArgument("spectrogram axes must be non-empty".into()));
        }
        if !strictly_increasing(&freq_axis_hz) {
            return Err(Error::InvalidArgument("frequency axis must be strictly increasing".into()));
        }
        if !strictly_increasing(&time_axis_s) {
            return Err(Error::InvalidArgument("time axis must be strictly increasing".into()));
        }
        if intensity.len() != freq_axis_hz.len() * time_axis_s.len() {
            return Err(Error::LengthMismatch(intensity.len(), freq_axis_hz.len() * time_axis_s.len()));
        }
        if let Some(bad) = intensity.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("intensity must be finite and non-negative, got {bad}")));
        }
        Ok(Self { intensity, freq_axis_hz, time_axis_s, normalization })
    }

    pub fn n_freq(&self) -> usize {
        self.freq_axis_hz.len()
    }

    pub fn n_time(&self) -> usize {
        self.time_axis_s.len()
    }

    pub fn freq_axis_hz(&self) -> &[f64] {
        &self.freq_axis_hz
    }

    pub fn time_axis_s(&self) -> &[f64] {
        &self.time_axis_s
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.intensity[row * self.n_time() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.n_time();
        &self.intensity[row * n..(row + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.intensity.chunks(self.n_time())
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_freq()).map(|r| self.get(r, col)).collect()
    }

    pub fn max(&self) -> f64 {
        self.intensity.iter().copied().fold(0.0, f64::max)
    }

    pub fn total(&self) -> f64 {
        self.intensity.iter().sum()
    }

    /// Divide by the global maximum. An all-zero matrix is returned as is,
    /// still marked unnormalized.
    pub fn normalized(mut self) -> Self {
        let m = self.max();
        if m > 0.0 {
            for v in self.intensity.iter_mut() {
                *v /= m;
            }
            self.normalization = Normalization::GlobalMax;
        }
        self
    }

    /// Index of the row whose frequency is nearest `f_hz` (lower on ties).
    pub fn nearest_row(&self, f_hz: f64) -> usize {
        nearest_index(&self.freq_axis_hz, f_hz)
    }

    /// Copy keeping only rows for which `keep(freq)` holds.
    pub fn retain_rows(&self, mut keep: impl FnMut(f64) -> bool) -> Result<Self> {
        let mut freqs = Vec::new();
        let mut data = Vec::new();
        for (r, &f) in self.freq_axis_hz.iter().enumerate() {
            if keep(f) {
                freqs.push(f);
                data.extend_from_slice(self.row(r));
            }
        }
        Self::from_flat(data, freqs, self.time_axis_s.clone(), self.normalization)
    }

    /// Largest absolute difference over rows present in both (matched by
    /// frequency to 1e-9 relative) and columns with equal index. Time axes
    /// must agree in length.
    pub fn linf_distance(&self, other: &Spectrogram) -> Result<f64> {
        if self.n_time() != other.n_time() {
            return Err(Error::LengthMismatch(self.n_time(), other.n_time()));
        }
        let mut worst: Option<f64> = None;
        for (r, &f) in self.freq_axis_hz.iter().enumerate() {
            let j = other.nearest_row(f);
            if (other.freq_axis_hz[j] - f).abs() > 1e-9 * f.abs().max(1.0) {
                continue;
            }
            let d = self
                .row(r)
                .iter()
                .zip(other.row(j))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            worst = Some(worst.map_or(d, |w: f64| w.max(d)));
        }
        worst.ok_or(Error::EmptyOverlap)
    }

    /// Delimited text: the first row holds an empty corner then the time axis
    /// in seconds; every following row is a frequency in Hz then intensities.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for t in &self.time_axis_s {
            let _ = write!(out, ",{t}");
        }
        out.push('\n');
        for (r, f) in self.freq_axis_hz.iter().enumerate() {
            let _ = write!(out, "{f}");
            for v in self.row(r) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Parse the format written by [`Spectrogram::to_csv`]. Rows may appear
    /// in any frequency order; they are sorted on load.
    pub fn from_csv(text: &str) -> Result<Self> {
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| Error::InvalidArgument(format!("bad number {s:?}: {e}")))
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::InvalidArgument("empty spectrogram file".into()))?;
        let mut cells = header.split(',');
        if !cells.next().is_some_and(|c| c.trim().is_empty()) {
            return Err(Error::InvalidArgument("corner cell must be empty".into()));
        }
        let times = cells.map(parse).collect::<Result<Vec<_>>>()?;
        let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
        for line in lines {
            let mut cells = line.split(',');
            let f = parse(cells.next().unwrap_or(""))?;
            let vals = cells.map(parse).collect::<Result<Vec<_>>>()?;
            rows.push((f, vals));
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (freqs, rows): (Vec<f64>, Vec<Vec<f64>>) = rows.into_iter().unzip();
        let mut s = Self::from_rows(rows, freqs, times)?;
        if (s.max() - 1.0).abs() < 1e-12 {
            s.normalization = Normalization::GlobalMax;
        }
        Ok(s)
    }

    /// 8-bit grayscale pixels, row-major, top row = highest frequency.
    /// Intensity is scaled by the global maximum.
    pub fn to_gray8(&self) -> (u32, u32, Vec<u8>) {
        let m = self.max();
        let (w, h) = (self.n_time(), self.n_freq());
        let mut px = Vec::with_capacity(w * h);
        for r in (0..h).rev() {
            for &v in self.row(r) {
                let q = if m > 0.0 { (v / m * 255.0).round() } else { 0.0 };
                px.push(q.clamp(0.0, 255.0) as u8);
            }
        }
        (w as u32, h as u32, px)
    }
}

pub(crate) fn nearest_index(axis: &[f64], x: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &a) in axis.iter().enumerate() {
        let d = (a - x).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}
