//! Independent ground truth: an STFT spectrogram, a two-tone resolvability
//! metric, and ridge comparison statistics.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::photonic::LinkConfig;
use crate::reconstruction::{reconstruct, Ridge};
use crate::spectrogram::Spectrogram;
use crate::timedivision::{run_time_division, validate_plan, SfcwPlan};
use crate::waveforms::{instantaneous_frequency, synthesize, SampledSignal, SignalSpec};

/// Valley-to-peak ratio below which two tones count as resolved (-3 dB).
pub const RESOLVED_VALLEY_RATIO: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowFn {
    Rectangular,
    #[default]
    Hann,
}

impl WindowFn {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowFn::Rectangular => vec![1.0; n],
            WindowFn::Hann => (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect(),
        }
    }
}

fn default_window() -> usize {
    512
}
fn default_hop() -> usize {
    128
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftParams {
    #[serde(default = "default_window")]
    pub window_len_samples: usize,
    #[serde(default = "default_hop")]
    pub hop_samples: usize,
    #[serde(default)]
    pub window_fn: WindowFn,
}

impl Default for StftParams {
    fn default() -> Self {
        Self { window_len_samples: default_window(), hop_samples: default_hop(), window_fn: WindowFn::Hann }
    }
}

impl StftParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_len_samples < 2 {
            return Err(Error::InvalidArgument("STFT window must have at least 2 samples".into()));
        }
        if self.hop_samples == 0 || self.hop_samples > self.window_len_samples {
            return Err(Error::InvalidArgument(format!(
                "STFT hop must be in 1..={}, got {}",
                self.window_len_samples, self.hop_samples
            )));
        }
        Ok(())
    }
}

/// One-sided power spectrogram without normalization. Each frame's bins
/// sum to the frame's windowed energy, so a rectangular window with
/// `hop == window` preserves total signal energy.
pub fn stft_raw(signal: &SampledSignal, params: &StftParams, execution: Execution) -> Result<Spectrogram> {
    params.validate()?;
    let w = params.window_len_samples;
    if signal.len() < w {
        return Err(Error::SignalTooShort { len: signal.len(), window: w });
    }
    let fs = signal.sample_rate_hz();
    let win = params.window_fn.coefficients(w);
    let n_frames = (signal.len() - w) / params.hop_samples + 1;
    let half = w / 2;
    let x = signal.samples();
    let frames = execution.map(n_frames, |j| {
        let start = j * params.hop_samples;
        let mut buf: Vec<Complex64> =
            (0..w).map(|i| Complex64::new(x[start + i] * win[i], 0.0)).collect();
        dsp::fft(&mut buf);
        (0..=half)
            .map(|k| {
                let scale = if k == 0 || (w.is_multiple_of(2) && k == half) { 1.0 } else { 2.0 };
                scale * buf[k].norm_sqr() / w as f64
            })
            .collect::<Vec<f64>>()
    });
    let rows = (0..=half).map(|k| frames.iter().map(|f| f[k]).collect()).collect();
    let freqs = (0..=half).map(|k| k as f64 * fs / w as f64).collect();
    let times = (0..n_frames)
        .map(|j| signal.t0_s() + (j * params.hop_samples) as f64 / fs + 0.5 * w as f64 / fs)
        .collect();
    Spectrogram::from_rows(rows, freqs, times)
}

/// Magnitude-squared STFT normalized to its global maximum.
pub fn stft(signal: &SampledSignal, params: &StftParams) -> Result<Spectrogram> {
    Ok(stft_raw(signal, params, Execution::default())?.normalized())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolvability {
    pub resolved: bool,
    pub valley_ratio: f64,
}

/// Depth of the valley between the rows nearest `f_a` and `f_b`.
///
/// Per-column minima between the two rows and per-column lesser peaks are
/// each averaged over time before taking their ratio. Two tones mapped to
/// the same or adjacent rows have no valley and give a ratio of 1.
pub fn two_tone_resolvability(spec: &Spectrogram, f_a: f64, f_b: f64) -> Result<Resolvability> {
    if f_a == f_b {
        return Err(Error::InvalidArgument("the two tones must differ in frequency".into()));
    }
    let axis = spec.freq_axis_hz();
    let (lo, hi) = (axis[0], axis[axis.len() - 1]);
    for f in [f_a, f_b] {
        if !(f >= lo && f <= hi) {
            return Err(Error::FrequencyOutOfAxis(f));
        }
    }
    let (mut ra, mut rb) = (spec.nearest_row(f_a), spec.nearest_row(f_b));
    if ra > rb {
        std::mem::swap(&mut ra, &mut rb);
    }
    let unresolved = Resolvability { resolved: false, valley_ratio: 1.0 };
    if rb - ra <= 1 {
        return Ok(unresolved);
    }
    let mut valley = 0.0;
    let mut peak = 0.0;
    for c in 0..spec.n_time() {
        let p = spec.get(ra, c).min(spec.get(rb, c));
        let v = (ra + 1..rb).map(|r| spec.get(r, c)).fold(f64::INFINITY, f64::min);
        valley += v;
        peak += p;
    }
    if !(peak > 0.0) {
        return Ok(unresolved);
    }
    let valley_ratio = valley / peak;
    Ok(Resolvability { resolved: valley_ratio < RESOLVED_VALLEY_RATIO, valley_ratio })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RidgeStats {
    pub median_abs_err_hz: f64,
    pub coverage_fraction: f64,
    pub n_compared: usize,
}

fn nearest_time(times: &[f64], t: f64) -> usize {
    let i = times.partition_point(|&x| x < t);
    if i == 0 {
        0
    } else if i == times.len() {
        times.len() - 1
    } else if (times[i] - t) < (t - times[i - 1]) {
        i
    } else {
        i - 1
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Compare two ridges on `a`'s time grid; `b` is resampled to it by nearest
/// neighbour. Only columns of `a` inside `b`'s time span count.
pub fn compare_ridges(a: &Ridge, b: &Ridge) -> Result<RidgeStats> {
    if a.times_s.is_empty() || b.times_s.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    let bt = &b.times_s;
    let slack = if bt.len() > 1 { 0.5 * (bt[bt.len() - 1] - bt[0]) / (bt.len() - 1) as f64 } else { 0.0 };
    let (t0, t1) = (bt[0] - slack, bt[bt.len() - 1] + slack);
    let mut support = 0usize;
    let mut diffs = Vec::new();
    for (t, fa) in a.times_s.iter().zip(&a.freqs_hz) {
        if *t < t0 || *t > t1 {
            continue;
        }
        support += 1;
        if let (Some(fa), Some(fb)) = (fa, b.freqs_hz[nearest_time(bt, *t)]) {
            diffs.push((fa - fb).abs());
        }
    }
    if diffs.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    Ok(RidgeStats {
        n_compared: diffs.len(),
        coverage_fraction: diffs.len() as f64 / support as f64,
        median_abs_err_hz: median(diffs),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruthStats {
    /// Fraction of all columns whose ridge is within tolerance of a true
    /// component.
    pub coverage: f64,
    /// Same, over columns where some true component lies within tolerance of
    /// a row of the frequency axis.
    pub measurable_coverage: f64,
    /// RMS distance from ridge to nearest true component, over measurable
    /// columns where the ridge is present.
    pub rms_error_hz: f64,
    pub n_columns: usize,
    pub n_measurable: usize,
}

/// Score a ridge against the analytic instantaneous frequency of `signal`.
/// Each column stands for the interval of half a column spacing either side
/// of its time, so its truth set is the instantaneous frequencies at the
/// centre and both ends. Times are taken modulo the signal period.
pub fn truth_agreement(ridge: &Ridge, signal: &SignalSpec, freq_axis_hz: &[f64], tolerance_hz: f64) -> Result<TruthStats> {
    let period = signal.period_s();
    let half = match ridge.times_s.as_slice() {
        [a, b, ..] => 0.5 * (b - a),
        _ => 0.0,
    };
    let truth_at = |t: f64| -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for dt in [-half, 0.0, half] {
            let tt = (t + dt).rem_euclid(period);
            let tt = if tt >= period { 0.0 } else { tt };
            out.extend(instantaneous_frequency(signal, tt)?);
        }
        Ok(out)
    };
    let row_near = |f: f64| freq_axis_hz.iter().any(|r| (r - f).abs() <= tolerance_hz);
    let (mut hits, mut hits_measurable, mut measurable) = (0usize, 0usize, 0usize);
    let (mut sq, mut n_err) = (0.0, 0usize);
    for (t, fr) in ridge.times_s.iter().zip(&ridge.freqs_hz) {
        let truth = truth_at(*t)?;
        let is_measurable = truth.iter().any(|&f| row_near(f));
        let err = fr.map(|r| truth.iter().map(|f| (r - f).abs()).fold(f64::INFINITY, f64::min));
        let hit = err.is_some_and(|e| e <= tolerance_hz);
        hits += hit as usize;
        if is_measurable {
            measurable += 1;
            hits_measurable += hit as usize;
            if let Some(e) = err {
                sq += e * e;
                n_err += 1;
            }
        }
    }
    if measurable == 0 || n_err == 0 {
        return Err(Error::EmptyOverlap);
    }
    Ok(TruthStats {
        coverage: hits as f64 / ridge.times_s.len() as f64,
        measurable_coverage: hits_measurable as f64 / measurable as f64,
        rms_error_hz: (sq / n_err as f64).sqrt(),
        n_columns: ridge.times_s.len(),
        n_measurable: measurable,
    })
}

/// Two-tone experiment on the time-division link.
///
/// Tones sit at `f_a` and `f_a + s`. The reference is placed `guard_hz`
/// (rounded up to whole steps) below `f_a`, which puts `f_a` on a row, and
/// the plan extends a few gain bandwidths past the widest separation tried.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationSearch {
    pub link: LinkConfig,
    pub sample_rate_hz: f64,
    pub f_a_hz: f64,
    pub delta_step_hz: f64,
    pub step_period_s: f64,
    pub guard_hz: f64,
}

impl SeparationSearch {
    pub fn new(link: LinkConfig, delta_step_hz: f64) -> Self {
        Self { link, sample_rate_hz: 10e9, f_a_hz: 3e9, delta_step_hz, step_period_s: 0.4e-6, guard_hz: 100e6 }
    }

    /// Separations from 5 to 50 MHz on a 2.5 MHz grid (whole cycles per
    /// 0.4 us step).
    pub fn default_grid() -> Vec<f64> {
        (2..=20).map(|i| i as f64 * 2.5e6).collect()
    }

    fn plan(&self, max_sep_hz: f64) -> Result<(SfcwPlan, f64)> {
        let guard_steps = (self.guard_hz / self.delta_step_hz).ceil().max(1.0) as usize;
        let f_first = self.f_a_hz - guard_steps as f64 * self.delta_step_hz;
        let span = max_sep_hz + 3.0 * self.link.gain_fwhm_hz;
        let n_steps = guard_steps + (span / self.delta_step_hz).ceil() as usize + 1;
        let plan = SfcwPlan::measuring_from(f_first, self.delta_step_hz, self.step_period_s, n_steps, &self.link)?;
        Ok((plan, f_first))
    }

    /// Valley ratio for one separation, with the plan sized for `max_sep_hz`.
    pub fn evaluate(&self, separation_hz: f64, max_sep_hz: f64) -> Result<Resolvability> {
        let cycles = separation_hz * self.step_period_s;
        if (cycles - cycles.round()).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "separation {separation_hz} Hz is not a whole number of cycles per step"
            )));
        }
        let (mut plan, f_ref) = self.plan(max_sep_hz.max(separation_hz))?;
        let f_b = self.f_a_hz + separation_hz;
        let spec = SignalSpec::MultiTone { f_list: vec![self.f_a_hz, f_b], period_s: self.step_period_s };
        validate_plan(&mut plan, self.step_period_s)?;
        let sut = synthesize(&spec, self.sample_rate_hz, 1)?;
        let trace = run_time_division(&sut, f_ref, &plan, &self.link)?;
        let tf = reconstruct(&trace, &self.link)?;
        two_tone_resolvability(&tf, self.f_a_hz, f_b)
    }
}

/// Smallest separation in `grid` for which the two tones are resolved.
/// Binary search; assumes resolvability is monotone in separation.
pub fn min_resolvable_separation(search: &SeparationSearch, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("separation grid is empty".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let max_sep = grid[grid.len() - 1];
    let (mut lo, mut hi) = (0usize, grid.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if search.evaluate(grid[mid], max_sep)?.resolved {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    if lo == grid.len() {
        return Err(Error::NoneResolved);
    }
    Ok(grid[lo])
}
