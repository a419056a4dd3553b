//! Signal-under-test synthesis and ground-truth instantaneous frequency.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};

/// Period used for stationary formats (tones) when none is given: 2 us.
pub const DEFAULT_TONE_PERIOD_S: f64 = 2e-6;

/// Relative tolerance when deciding that a duration is a whole number of
/// samples.
const SAMPLE_GRID_TOL: f64 = 1e-9;

/// A real-valued waveform with a uniform sample rate.
#[derive(Debug, Clone)]
pub struct SampledSignal {
    samples: Vec<f64>,
    sample_rate_hz: f64,
    t0_s: f64,
    extent: OnceLock<f64>,
}

impl PartialEq for SampledSignal {
    fn eq(&self, other: &Self) -> bool {
        self.samples == other.samples
            && self.sample_rate_hz == other.sample_rate_hz
            && self.t0_s == other.t0_s
    }
}

impl SampledSignal {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, t0_s: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::InvalidArgument("signal needs at least one sample".into()));
        }
        if !t0_s.is_finite() {
            return Err(Error::InvalidArgument("start time must be finite".into()));
        }
        Ok(Self { samples, sample_rate_hz, t0_s, extent: OnceLock::new() })
    }

    /// All-zero signal.
    pub fn zeros(len: usize, sample_rate_hz: f64) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate_hz, 0.0)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn t0_s(&self) -> f64 {
        self.t0_s
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.t0_s + index as f64 / self.sample_rate_hz
    }

    pub fn peak_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|v| v * factor).collect(),
            sample_rate_hz: self.sample_rate_hz,
            t0_s: self.t0_s,
            extent: OnceLock::new(),
        }
    }

    /// Copy of samples `start..end`, with the start time advanced accordingly.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::InvalidArgument(format!(
                "slice {start}..{end} of {} samples",
                self.len()
            )));
        }
        Self::new(self.samples[start..end].to_vec(), self.sample_rate_hz, self.time_at(start))
    }

    /// Highest significant frequency of the waveform (energy-tail definition,
    /// see [`dsp::spectral_extent`]). Computed once and cached.
    pub fn spectral_extent_hz(&self) -> f64 {
        *self.extent.get_or_init(|| dsp::spectral_extent(&self.samples, self.sample_rate_hz))
    }
}

/// One entry of a frequency-hopping table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hop {
    pub start_s: f64,
    pub f_hz: f64,
}

fn default_tone_period() -> f64 {
    DEFAULT_TONE_PERIOD_S
}

/// Periodic signal-under-test formats.
///
/// All formats have unit peak amplitude; multi-component formats split the
/// amplitude evenly between components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    Tone {
        f_hz: f64,
        #[serde(default = "default_tone_period")]
        period_s: f64,
    },
    MultiTone {
        f_list: Vec<f64>,
        #[serde(default = "default_tone_period")]
        period_s: f64,
    },
    Lfm { f_start_hz: f64, f_end_hz: f64, period_s: f64 },
    /// Simultaneous up- and down-chirp over the same band.
    DualChirpLfm { f_start_hz: f64, f_end_hz: f64, period_s: f64 },
    /// Polynomial frequency law `f(t) = sum_i c_i (t/T)^i`.
    Nlfm { coefficients_hz: Vec<f64>, period_s: f64 },
    FrequencyHopping { hops: Vec<Hop>, period_s: f64 },
    StepFrequency { f_start_hz: f64, f_step_hz: f64, dwell_s: f64, n_steps: usize },
}

impl SignalSpec {
    pub fn tone(f_hz: f64) -> Self {
        SignalSpec::Tone { f_hz, period_s: DEFAULT_TONE_PERIOD_S }
    }

    /// Quadratic sweep `f0 + (f1 - f0)(t/T)^2`, the default NLFM law.
    pub fn nlfm_quadratic(f_start_hz: f64, f_end_hz: f64, period_s: f64) -> Self {
        SignalSpec::Nlfm { coefficients_hz: vec![f_start_hz, 0.0, f_end_hz - f_start_hz], period_s }
    }

    pub fn period_s(&self) -> f64 {
        match self {
            SignalSpec::Tone { period_s, .. }
            | SignalSpec::MultiTone { period_s, .. }
            | SignalSpec::Lfm { period_s, .. }
            | SignalSpec::DualChirpLfm { period_s, .. }
            | SignalSpec::Nlfm { period_s, .. }
            | SignalSpec::FrequencyHopping { period_s, .. } => *period_s,
            SignalSpec::StepFrequency { dwell_s, n_steps, .. } => dwell_s * *n_steps as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let period = self.period_s();
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidSpec(format!("period must be positive, got {period}")));
        }
        let nonneg = |f: f64, what: &str| -> Result<()> {
            if f >= 0.0 && f.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{what} must be a non-negative frequency, got {f}")))
            }
        };
        match self {
            SignalSpec::Tone { f_hz, .. } => nonneg(*f_hz, "tone frequency"),
            SignalSpec::MultiTone { f_list, .. } => {
                if f_list.is_empty() {
                    return Err(Error::InvalidSpec("multi-tone needs at least one tone".into()));
                }
                f_list.iter().try_for_each(|&f| nonneg(f, "tone frequency"))
            }
            SignalSpec::Lfm { f_start_hz, f_end_hz, .. }
            | SignalSpec::DualChirpLfm { f_start_hz, f_end_hz, .. } => {
                nonneg(*f_start_hz, "chirp start")?;
                nonneg(*f_end_hz, "chirp end")
            }
            SignalSpec::Nlfm { coefficients_hz, .. } => {
                if coefficients_hz.is_empty() {
                    return Err(Error::InvalidSpec("NLFM law needs coefficients".into()));
                }
                for i in 0..=NLFM_GRID {
                    nonneg(poly(coefficients_hz, i as f64 / NLFM_GRID as f64), "NLFM frequency")?;
                }
                Ok(())
            }
            SignalSpec::FrequencyHopping { hops, period_s } => {
                if hops.is_empty() {
                    return Err(Error::InvalidSpec("hop table is empty".into()));
                }
                if hops[0].start_s != 0.0 {
                    return Err(Error::InvalidSpec("hop table must start at t = 0".into()));
                }
                for w in hops.windows(2) {
                    if !(w[1].start_s > w[0].start_s) {
                        return Err(Error::InvalidSpec(
                            "hop table must be sorted with distinct start times".into(),
                        ));
                    }
                }
                if hops.last().is_some_and(|h| h.start_s >= *period_s) {
                    return Err(Error::InvalidSpec("hop starts beyond the period".into()));
                }
                hops.iter().try_for_each(|h| nonneg(h.f_hz, "hop frequency"))
            }
            SignalSpec::StepFrequency { f_start_hz, f_step_hz, n_steps, .. } => {
                if *n_steps == 0 {
                    return Err(Error::InvalidSpec("step-frequency signal needs steps".into()));
                }
                nonneg(*f_start_hz, "first step")?;
                nonneg(f_start_hz + (*n_steps as f64 - 1.0) * f_step_hz, "last step")
            }
        }
    }

    /// Largest instantaneous frequency over one period.
    pub fn max_frequency_hz(&self) -> f64 {
        match self {
            SignalSpec::Tone { f_hz, .. } => *f_hz,
            SignalSpec::MultiTone { f_list, .. } => f_list.iter().cloned().fold(0.0, f64::max),
            SignalSpec::Lfm { f_start_hz, f_end_hz, .. }
            | SignalSpec::DualChirpLfm { f_start_hz, f_end_hz, .. } => f_start_hz.max(*f_end_hz),
            SignalSpec::Nlfm { coefficients_hz, .. } => (0..=NLFM_GRID)
                .map(|i| poly(coefficients_hz, i as f64 / NLFM_GRID as f64))
                .fold(0.0, f64::max),
            SignalSpec::FrequencyHopping { hops, .. } => {
                hops.iter().map(|h| h.f_hz).fold(0.0, f64::max)
            }
            SignalSpec::StepFrequency { f_start_hz, f_step_hz, n_steps, .. } => {
                f_start_hz.max(f_start_hz + (*n_steps as f64 - 1.0) * f_step_hz)
            }
        }
    }

    /// Sample value at time `t` within one period (`0 <= t < period`).
    fn value_at(&self, t: f64) -> f64 {
        match self {
            SignalSpec::Tone { f_hz, .. } => dsp::cycles_to_phase(f_hz * t).cos(),
            SignalSpec::MultiTone { f_list, .. } => {
                let k = f_list.len() as f64;
                f_list.iter().map(|f| dsp::cycles_to_phase(f * t).cos()).sum::<f64>() / k
            }
            SignalSpec::Lfm { f_start_hz, f_end_hz, period_s } => {
                let rate = (f_end_hz - f_start_hz) / period_s;
                dsp::cycles_to_phase(f_start_hz * t + 0.5 * rate * t * t).cos()
            }
            SignalSpec::DualChirpLfm { f_start_hz, f_end_hz, period_s } => {
                let rate = (f_end_hz - f_start_hz) / period_s;
                let up = f_start_hz * t + 0.5 * rate * t * t;
                let down = f_end_hz * t - 0.5 * rate * t * t;
                0.5 * (dsp::cycles_to_phase(up).cos() + dsp::cycles_to_phase(down).cos())
            }
            SignalSpec::Nlfm { coefficients_hz, period_s } => {
                let u = t / period_s;
                // integral of the frequency law, in cycles
                let mut cycles = 0.0;
                let mut pow = u;
                for (i, c) in coefficients_hz.iter().enumerate() {
                    cycles += c * pow / (i as f64 + 1.0);
                    pow *= u;
                }
                dsp::cycles_to_phase(cycles * period_s).cos()
            }
            SignalSpec::FrequencyHopping { hops, period_s } => {
                let mut base = 0.0;
                let mut idx = 0;
                for (i, h) in hops.iter().enumerate() {
                    if h.start_s <= t {
                        idx = i;
                    }
                }
                for (i, h) in hops.iter().enumerate().take(idx) {
                    let end = hops.get(i + 1).map_or(*period_s, |n| n.start_s);
                    base += h.f_hz * (end - h.start_s);
                }
                let h = hops[idx];
                dsp::cycles_to_phase(base + h.f_hz * (t - h.start_s)).cos()
            }
            SignalSpec::StepFrequency { f_start_hz, f_step_hz, dwell_s, n_steps } => {
                let idx = ((t / dwell_s).floor() as usize).min(n_steps - 1);
                let mut base = 0.0;
                for j in 0..idx {
                    base += (f_start_hz + j as f64 * f_step_hz) * dwell_s;
                }
                let f = f_start_hz + idx as f64 * f_step_hz;
                dsp::cycles_to_phase(base + f * (t - idx as f64 * dwell_s)).cos()
            }
        }
    }
}

const NLFM_GRID: usize = 1000;

fn poly(coefficients: &[f64], u: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * u + c)
}

/// Number of samples in `duration_s` at `fs`, requiring it to be a whole number.
pub fn whole_samples(duration_s: f64, fs: f64) -> Result<usize> {
    let exact = duration_s * fs;
    let n = exact.round();
    if n < 1.0 || (exact - n).abs() > SAMPLE_GRID_TOL * exact.max(1.0) {
        return Err(Error::InvalidSpec(format!(
            "duration {duration_s} s is not a whole number of samples at {fs} Hz"
        )));
    }
    Ok(n as usize)
}

/// Generate `n_periods` periods of `spec` at `sample_rate_hz`.
pub fn synthesize(spec: &SignalSpec, sample_rate_hz: f64, n_periods: usize) -> Result<SampledSignal> {
    spec.validate()?;
    if n_periods == 0 {
        return Err(Error::InvalidArgument("n_periods must be positive".into()));
    }
    let f_max = spec.max_frequency_hz();
    if !(sample_rate_hz > 2.0 * f_max) {
        return Err(Error::NyquistViolation(format!(
            "sample rate {sample_rate_hz} Hz does not exceed twice the highest frequency {f_max} Hz"
        )));
    }
    let per_period = whole_samples(spec.period_s(), sample_rate_hz)?;
    let one: Vec<f64> =
        (0..per_period).map(|i| spec.value_at(i as f64 / sample_rate_hz)).collect();
    let one = SampledSignal::new(one, sample_rate_hz, 0.0)?;
    Ok(tile_periodic(&one, n_periods))
}

/// All frequency components present at `t_s` (within one period), ascending.
/// Coincident components are reported once. Hop and step boundaries belong
/// to the new hop.
pub fn instantaneous_frequency(spec: &SignalSpec, t_s: f64) -> Result<Vec<f64>> {
    let period = spec.period_s();
    if !(t_s >= 0.0 && t_s < period) {
        return Err(Error::OutOfRange { t_s, period_s: period });
    }
    let mut out = match spec {
        SignalSpec::Tone { f_hz, .. } => vec![*f_hz],
        SignalSpec::MultiTone { f_list, .. } => f_list.clone(),
        SignalSpec::Lfm { f_start_hz, f_end_hz, period_s } => {
            vec![f_start_hz + (f_end_hz - f_start_hz) * t_s / period_s]
        }
        SignalSpec::DualChirpLfm { f_start_hz, f_end_hz, period_s } => {
            let d = (f_end_hz - f_start_hz) * t_s / period_s;
            vec![f_start_hz + d, f_end_hz - d]
        }
        SignalSpec::Nlfm { coefficients_hz, period_s } => vec![poly(coefficients_hz, t_s / period_s)],
        SignalSpec::FrequencyHopping { hops, .. } => {
            let h = hops.iter().rev().find(|h| h.start_s <= t_s).unwrap_or(&hops[0]);
            vec![h.f_hz]
        }
        SignalSpec::StepFrequency { f_start_hz, f_step_hz, dwell_s, n_steps } => {
            // nudge so that exact boundaries land in the new step despite rounding
            let idx = ((t_s / dwell_s * (1.0 + 1e-12)).floor() as usize).min(n_steps - 1);
            vec![f_start_hz + idx as f64 * f_step_hz]
        }
    };
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let scale = out.iter().fold(1.0_f64, |m, f| m.max(f.abs()));
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * scale);
    Ok(out)
}

/// Pointwise sum of two signals on the same time grid (the electrical coupler).
pub fn sum(a: &SampledSignal, b: &SampledSignal) -> Result<SampledSignal> {
    check_same_grid(a, b)?;
    let samples = a.samples.iter().zip(&b.samples).map(|(x, y)| x + y).collect();
    SampledSignal::new(samples, a.sample_rate_hz, a.t0_s)
}

pub(crate) fn check_same_grid(a: &SampledSignal, b: &SampledSignal) -> Result<()> {
    if !same_rate(a.sample_rate_hz, b.sample_rate_hz) {
        return Err(Error::RateMismatch(a.sample_rate_hz, b.sample_rate_hz));
    }
    if (a.t0_s - b.t0_s).abs() > 0.5 / a.sample_rate_hz * 1e-6 {
        return Err(Error::StartMismatch(a.t0_s, b.t0_s));
    }
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    Ok(())
}

pub(crate) fn same_rate(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// Repeat a signal `repetitions` times back to back.
///
/// # Panics
/// If `repetitions` is zero.
pub fn tile_periodic(signal: &SampledSignal, repetitions: usize) -> SampledSignal {
    assert!(repetitions > 0, "repetitions must be positive");
    let mut samples = Vec::with_capacity(signal.len() * repetitions);
    for _ in 0..repetitions {
        samples.extend_from_slice(&signal.samples);
    }
    SampledSignal {
        samples,
        sample_rate_hz: signal.sample_rate_hz,
        t0_s: signal.t0_s,
        extent: OnceLock::new(),
    }
}

/// Cosine tone of amplitude `amplitude` on the given grid.
pub fn tone_samples(f_hz: f64, amplitude: f64, len: usize, fs: f64) -> Vec<f64> {
    (0..len).map(|i| amplitude * dsp::cycles_to_phase(f_hz * i as f64 / fs).cos()).collect()
}
