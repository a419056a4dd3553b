//! From a raw time-division trace to a spectrogram: find the reference pulse,
//! cut out one scan, split it into steps and stack the steps as rows.

use serde::Serialize;

use crate::dsp;
use crate::error::{Error, Result};
use crate::photonic::LinkConfig;
use crate::spectrogram::Spectrogram;
use crate::timedivision::{RawTrace, SfcwPlan};
use crate::waveforms::SampledSignal;

pub const DEFAULT_MIN_HEIGHT_RATIO: f64 = 0.5;
pub const DEFAULT_MIN_WIDTH_RATIO: f64 = 2.0;

/// Fraction of the global maximum below which samples do not belong to any
/// pulse.
const PULSE_FLOOR_RATIO: f64 = 0.02;

/// Rows within this many gain bandwidths of the reference are discarded.
const REFERENCE_GUARD_FWHM: f64 = 1.5;

/// The reference pulse must be wide, but never wider than most of a step: a
/// stationary SUT produces step-long pulses too.
const MAX_REQUIRED_WIDTH_STEPS: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulseDetection {
    /// Sample index of the pulse maximum.
    pub center_index: usize,
    /// Full width at half maximum, in samples.
    pub width_samples: usize,
    /// Height above the baseline.
    pub height: f64,
    /// First sample at or above half maximum.
    pub start_index: usize,
}

/// One full scan cut out of a raw trace, starting at a step boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub signal: SampledSignal,
    pub plan: SfcwPlan,
    pub measured_freqs_hz: Vec<f64>,
    /// Gain-bypassed detector level for one step, aligned with each segment.
    pub baseline: Vec<f64>,
    pub reference_levels: Vec<f64>,
    pub reference_freq_hz: f64,
}

fn baseline_removed(trace: &RawTrace) -> Vec<f64> {
    let l = trace.step_len();
    let off = trace.capture_offset_samples % l;
    trace
        .detected
        .samples()
        .iter()
        .enumerate()
        .map(|(i, v)| v - trace.baseline[(off + i) % l])
        .collect()
}

struct Run {
    start: usize,
    peak: usize,
    height: f64,
    fwhm_start: usize,
    fwhm: usize,
}

fn find_runs(x: &[f64], floor: f64) -> Vec<Run> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < x.len() {
        if x[i] <= floor {
            i += 1;
            continue;
        }
        let start = i;
        while i < x.len() && x[i] > floor {
            i += 1;
        }
        let end = i;
        let mut peak = start;
        for j in start..end {
            if x[j] > x[peak] {
                peak = j;
            }
        }
        let height = x[peak];
        let half = 0.5 * height;
        let mut lo = peak;
        while lo > start && x[lo - 1] >= half {
            lo -= 1;
        }
        let mut hi = peak + 1;
        while hi < end && x[hi] >= half {
            hi += 1;
        }
        runs.push(Run { start, peak, height, fwhm_start: lo, fwhm: hi - lo });
    }
    runs
}

/// Locate the earliest pulse that is both high (relative to the global
/// maximum) and wide (relative to the median pulse width).
pub fn find_reference_pulse(trace: &RawTrace, min_height_ratio: f64, min_width_ratio: f64) -> Result<PulseDetection> {
    let x = baseline_removed(trace);
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(m > 0.0) {
        return Err(Error::NoReferenceFound("trace carries no pulses above the baseline".into()));
    }
    let runs = find_runs(&x, PULSE_FLOOR_RATIO * m);
    let mut widths: Vec<usize> = runs.iter().map(|r| r.fwhm).collect();
    widths.sort_unstable();
    let median = widths[widths.len() / 2] as f64;
    let required = (min_width_ratio * median).min(MAX_REQUIRED_WIDTH_STEPS * trace.step_len() as f64);
    let qualifying: Vec<&Run> = runs
        .iter()
        .filter(|r| r.height >= min_height_ratio * m && r.fwhm as f64 >= required)
        .collect();
    // a pulse cut by the start of the capture has an unreliable left edge
    let pick = qualifying
        .iter()
        .find(|r| r.start > 0)
        .or_else(|| qualifying.first())
        .ok_or_else(|| {
            Error::NoReferenceFound(format!(
                "no pulse reaches {min_height_ratio} of the maximum with width >= {required} samples"
            ))
        })?;
    Ok(PulseDetection {
        center_index: pick.peak,
        width_samples: pick.fwhm,
        height: pick.height,
        start_index: pick.fwhm_start,
    })
}

/// Step (0-based) at which the reference pulse's half-maximum edge begins,
/// predicted from the per-step reference levels.
fn anchor_step(levels: &[f64]) -> usize {
    let n = levels.len();
    let mut top = 0;
    for (i, &v) in levels.iter().enumerate() {
        if v > levels[top] {
            top = i;
        }
    }
    let half = 0.5 * levels[top];
    let mut j = top;
    for _ in 0..n - 1 {
        let prev = (j + n - 1) % n;
        if levels[prev] >= half {
            j = prev;
        } else {
            break;
        }
    }
    j
}

/// Cut one full scan out of `trace`, aligned so that the anchor pulse falls
/// in the step that carries the reference.
pub fn extract_frame(trace: &RawTrace, anchor: &PulseDetection) -> Result<Frame> {
    let l = trace.step_len();
    let n = trace.plan.n_steps;
    let needed = n * l;
    let len = trace.detected.len();
    let j = anchor_step(&trace.reference_levels);
    let mut start = anchor.start_index as i64 - (j * l) as i64;
    if start < 0 {
        start += needed as i64;
    }
    let start = start as usize;
    if start + needed > len {
        return Err(Error::InsufficientData { start, needed, available: len.saturating_sub(start) });
    }
    let signal = trace.detected.slice(start, start + needed)?;
    let rot = (trace.capture_offset_samples + start) % l;
    let baseline = (0..l).map(|i| trace.baseline[(rot + i) % l]).collect();
    Ok(Frame {
        signal,
        plan: trace.plan.clone(),
        measured_freqs_hz: trace.measured_freqs_hz.clone(),
        baseline,
        reference_levels: trace.reference_levels.clone(),
        reference_freq_hz: trace.reference_freq_hz,
    })
}

fn kept_rows(frame: &Frame, config: &LinkConfig) -> Vec<usize> {
    let guard = REFERENCE_GUARD_FWHM * config.gain_fwhm_hz;
    (0..frame.plan.n_steps)
        .filter(|&n| (frame.measured_freqs_hz[n] - frame.reference_freq_hz).abs() > guard)
        .collect()
}

fn step_len(frame: &Frame) -> Result<usize> {
    let len = frame.signal.len();
    let n = frame.plan.n_steps;
    if n == 0 || !len.is_multiple_of(n) {
        return Err(Error::LengthIndivisible { len, n_steps: n });
    }
    let l = len / n;
    if frame.baseline.len() != l {
        return Err(Error::LengthMismatch(frame.baseline.len(), l));
    }
    if frame.reference_levels.len() != n || frame.measured_freqs_hz.len() != n {
        return Err(Error::LengthMismatch(frame.reference_levels.len(), n));
    }
    Ok(l)
}

/// Full-rate excess (above baseline and reference level, clamped at zero)
/// of step `n`.
fn excess_row(frame: &Frame, l: usize, n: usize) -> Vec<f64> {
    let seg = &frame.signal.samples()[n * l..(n + 1) * l];
    let r = frame.reference_levels[n];
    seg.iter().zip(&frame.baseline).map(|(x, b)| (x - b - r).max(0.0)).collect()
}

/// Stack the steps of `frame` as rows without normalizing.
pub fn segment_and_stack_raw(frame: &Frame, config: &LinkConfig) -> Result<Spectrogram> {
    let l = step_len(frame)?;
    let fs = frame.signal.sample_rate_hz();
    let dec = config.output_decimation(fs);
    let keep = kept_rows(frame, config);
    if keep.is_empty() {
        return Err(Error::InvalidPlan("every step lies within the reference guard band".into()));
    }
    let rows = config.execution.map(keep.len(), |i| dsp::decimate(&excess_row(frame, l, keep[i]), dec));
    let freqs = keep.iter().map(|&n| frame.measured_freqs_hz[n]).collect();
    let times = (0..rows[0].len()).map(|i| (i * dec) as f64 / fs).collect();
    Spectrogram::from_rows(rows, freqs, times)
}

/// Stack the steps of `frame` as rows, drop the reference rows and
/// normalize to the global maximum.
pub fn segment_and_stack(frame: &Frame, config: &LinkConfig) -> Result<Spectrogram> {
    Ok(segment_and_stack_raw(frame, config)?.normalized())
}

/// The whole chain with default detection thresholds.
pub fn reconstruct(trace: &RawTrace, config: &LinkConfig) -> Result<Spectrogram> {
    let anchor = find_reference_pulse(trace, DEFAULT_MIN_HEIGHT_RATIO, DEFAULT_MIN_WIDTH_RATIO)?;
    let frame = extract_frame(trace, &anchor)?;
    segment_and_stack(&frame, config)
}

/// FWHM in seconds of the main pulse in the row carrying the most excess
/// energy (reference rows excluded), measured at the full detector rate and
/// circularly within its step. `None` if no SUT pulse exists.
pub fn pulse_fwhm_s(frame: &Frame, config: &LinkConfig) -> Result<Option<f64>> {
    let l = step_len(frame)?;
    let keep = kept_rows(frame, config);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for n in keep {
        let row = excess_row(frame, l, n);
        let e: f64 = row.iter().sum();
        if e > 0.0 && best.as_ref().is_none_or(|(be, _)| e > *be) {
            best = Some((e, row));
        }
    }
    let Some((_, row)) = best else { return Ok(None) };
    let h = row.iter().copied().fold(0.0, f64::max);
    let peak = row.iter().position(|&v| v == h).unwrap_or(0);
    let half = 0.5 * h;
    let mut width = 1;
    let mut i = peak;
    while width < l && row[(i + l - 1) % l] >= half {
        i = (i + l - 1) % l;
        width += 1;
    }
    let mut k = peak;
    while width < l && row[(k + 1) % l] >= half {
        k = (k + 1) % l;
        width += 1;
    }
    Ok(Some(width as f64 / frame.signal.sample_rate_hz()))
}

/// Per-column argmax frequency estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Ridge {
    pub times_s: Vec<f64>,
    pub freqs_hz: Vec<Option<f64>>,
}

impl Ridge {
    pub fn present(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times_s.iter().zip(&self.freqs_hz).filter_map(|(&t, f)| f.map(|f| (t, f)))
    }

    pub fn coverage(&self) -> f64 {
        self.freqs_hz.iter().filter(|f| f.is_some()).count() as f64 / self.freqs_hz.len().max(1) as f64
    }

    /// Least-squares slope of frequency against time over columns with
    /// `t0 <= t < t1`, in Hz/s.
    pub fn slope_hz_per_s(&self, t0: f64, t1: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self.present().filter(|(t, _)| *t >= t0 && *t < t1).collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let mf = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|(t, f)| (t - mt) * (f - mf)).sum();
        let sxx: f64 = pts.iter().map(|(t, _)| (t - mt).powi(2)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    }
}

/// Frequency of the brightest row in each column, absent when that maximum
/// is below `power_floor`. Ties go to the lower frequency.
pub fn ridge(spec: &Spectrogram, power_floor: f64) -> Ridge {
    let freqs = spec.freq_axis_hz();
    let freqs_hz = (0..spec.n_time())
        .map(|c| {
            let mut best = 0;
            let mut best_v = spec.get(0, c);
            for r in 1..spec.n_freq() {
                let v = spec.get(r, c);
                if v > best_v {
                    best = r;
                    best_v = v;
                }
            }
            (best_v >= power_floor && best_v > 0.0).then_some(freqs[best])
        })
        .collect();
    Ridge { times_s: spec.time_axis_s().to_vec(), freqs_hz }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timedivision::SfcwPlan;

    fn synthetic_trace(pulses: &[(usize, usize, f64)], n_steps: usize, step_len: usize) -> RawTrace {
        let mut x = vec![0.0; n_steps * step_len];
        for &(start, width, h) in pulses {
            for v in &mut x[start..start + width] {
                *v = h;
            }
        }
        let mut levels = vec![0.0; n_steps];
        levels[0] = 1.0;
        RawTrace {
            detected: SampledSignal::new(x, 1e9, 0.0).unwrap(),
            plan: SfcwPlan::new(0.0, 25e6, step_len as f64 / 1e9, n_steps).unwrap(),
            measured_freqs_hz: (0..n_steps).map(|n| 100e6 + n as f64 * 25e6).collect(),
            reference_freq_hz: 100e6,
            baseline: vec![0.0; step_len],
            reference_levels: levels,
            optical_oversampling: 1,
            capture_offset_samples: 0,
        }
    }

    #[test]
    fn reference_beats_sut_pulses() {
        // reference: wide and high in step 0; SUT: narrow pulses
        let tr = synthetic_trace(&[(0, 100, 4.0), (150, 5, 1.0), (250, 5, 1.0), (350, 5, 1.0)], 4, 100);
        let p = find_reference_pulse(&tr, 0.5, 2.0).unwrap();
        assert_eq!(p.start_index, 0);
        assert_eq!(p.width_samples, 100);
        assert_eq!(p.height, 4.0);
    }

    #[test]
    fn narrow_tallest_pulse_is_rejected() {
        let tr = synthetic_trace(
            &[(20, 3, 10.0), (100, 100, 6.0), (230, 4, 1.0), (330, 4, 1.0)],
            4,
            100,
        );
        let p = find_reference_pulse(&tr, 0.5, 2.0).unwrap();
        assert_eq!(p.start_index, 100);
    }

    #[test]
    fn zero_trace_has_no_reference() {
        let tr = synthetic_trace(&[], 4, 100);
        assert!(matches!(find_reference_pulse(&tr, 0.5, 2.0), Err(Error::NoReferenceFound(_))));
    }

    #[test]
    fn frame_extraction_bookkeeping() {
        let one = synthetic_trace(&[(0, 100, 4.0), (150, 5, 1.0)], 4, 100);
        let two = one.cyclic_capture(0, 800).unwrap();
        let anchor = find_reference_pulse(&two, 0.5, 2.0).unwrap();
        let f = extract_frame(&two, &anchor).unwrap();
        assert_eq!(f.signal.samples(), one.detected.samples());
        // anchor in the last partial scan
        let late = PulseDetection { start_index: 500, ..anchor };
        assert!(matches!(extract_frame(&two, &late), Err(Error::InsufficientData { .. })));
        // capture that begins mid-scan
        let mid = one.cyclic_capture(230, 800).unwrap();
        let a = find_reference_pulse(&mid, 0.5, 2.0).unwrap();
        assert_eq!(a.start_index, 170);
        let f = extract_frame(&mid, &a).unwrap();
        assert_eq!(f.signal.samples(), one.detected.samples());
    }

    #[test]
    fn full_band_frame_length() {
        assert_eq!(781usize * crate::waveforms::whole_samples(2e-6, 10e9).unwrap(), 15_620_000);
    }

    #[test]
    fn zero_frame_gives_zero_spectrogram() {
        let l = 310;
        let frame = Frame {
            signal: SampledSignal::zeros(4 * l, 10e9).unwrap(),
            plan: SfcwPlan::new(50e6, 25e6, l as f64 / 10e9, 4).unwrap(),
            measured_freqs_hz: vec![100e6, 125e6, 150e6, 175e6],
            baseline: vec![0.0; l],
            reference_levels: vec![0.0; 4],
            reference_freq_hz: 100e6,
        };
        let cfg = LinkConfig::default();
        let s = segment_and_stack(&frame, &cfg).unwrap();
        assert_eq!(s.max(), 0.0);
        assert_eq!(s.normalization(), crate::spectrogram::Normalization::None);
        // 100 and 125 MHz are within 30 MHz of the reference
        assert_eq!(s.freq_axis_hz(), &[150e6, 175e6]);
        assert_eq!(s.n_time(), 10);
        let bad = Frame { signal: SampledSignal::zeros(4 * l + 1, 10e9).unwrap(), ..frame };
        assert!(matches!(segment_and_stack(&bad, &cfg), Err(Error::LengthIndivisible { .. })));
    }

    #[test]
    fn ridge_rules() {
        let s = Spectrogram::from_rows(
            vec![vec![0.0, 1.0, 0.5], vec![0.0, 1.0, 0.7]],
            vec![1e9, 2e9],
            vec![0.0, 1.0, 2.0],
        )
        .unwrap();
        let r = ridge(&s, 0.1);
        assert_eq!(r.freqs_hz, vec![None, Some(1e9), Some(2e9)]);
        let bright = Spectrogram::from_rows(vec![vec![0.0; 3], vec![1.0; 3]], vec![1e9, 2e9], vec![0.0, 1.0, 2.0])
            .unwrap();
        assert!(ridge(&bright, 0.5).freqs_hz.iter().all(|f| *f == Some(2e9)));
    }
}
