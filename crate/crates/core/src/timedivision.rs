//! Time-division link: one fixed Brillouin gain scanned by an SFCW carrier.
//!
//! Step `n` shifts the probe carrier down by `f_step_n`, so the upper sideband
//! of a SUT component at `f` sits at `f - f_step_n`. The gain is centred at
//! `f_pump - f_SBS`, so step `n` measures `f_n = f_step_n + f_pump - f_SBS`.
//! The SUT repeats a whole number of times per step, so each step is one full
//! frequency-to-time mapping of that bin.

use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::photonic::{self, LinkConfig};
use crate::waveforms::{tile_periodic, tone_samples, whole_samples, SampledSignal};

/// Relative tolerance when checking `T_step = m T_s`.
const PERIOD_TOL: f64 = 1e-9;

/// Step-frequency carrier schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SfcwPlan {
    pub f_step1_hz: f64,
    pub delta_step_hz: f64,
    pub step_period_s: f64,
    pub n_steps: usize,
    /// Whole SUT periods per step, filled in by [`validate_plan`].
    #[serde(default)]
    pub period_multiple_m: Option<usize>,
}

impl SfcwPlan {
    pub fn new(f_step1_hz: f64, delta_step_hz: f64, step_period_s: f64, n_steps: usize) -> Result<Self> {
        let plan = Self { f_step1_hz, delta_step_hz, step_period_s, n_steps, period_multiple_m: None };
        plan.check_shape()?;
        Ok(plan)
    }

    /// Plan whose first step measures `f_first_hz` under `config`.
    pub fn measuring_from(
        f_first_hz: f64,
        delta_step_hz: f64,
        step_period_s: f64,
        n_steps: usize,
        config: &LinkConfig,
    ) -> Result<Self> {
        Self::new(f_first_hz - config.gain_center_hz(), delta_step_hz, step_period_s, n_steps)
    }

    pub fn check_shape(&self) -> Result<()> {
        if !(self.delta_step_hz > 0.0 && self.delta_step_hz.is_finite()) {
            return Err(Error::InvalidPlan(format!("step interval must be positive, got {}", self.delta_step_hz)));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidPlan("at least one step is required".into()));
        }
        if !(self.step_period_s > 0.0 && self.step_period_s.is_finite()) {
            return Err(Error::InvalidPlan(format!("step period must be positive, got {}", self.step_period_s)));
        }
        if !self.f_step1_hz.is_finite() {
            return Err(Error::InvalidPlan("first step frequency must be finite".into()));
        }
        if self.period_multiple_m == Some(0) {
            return Err(Error::InvalidPlan("period multiple must be positive".into()));
        }
        Ok(())
    }

    /// Carrier frequency of step `n` (1-based).
    pub fn step_frequency(&self, n: usize) -> f64 {
        self.f_step1_hz + (n - 1) as f64 * self.delta_step_hz
    }

    pub fn scan_duration_s(&self) -> f64 {
        self.n_steps as f64 * self.step_period_s
    }
}

/// Check `T_step = m T_s` for a whole `m`, record it in the plan and return it.
pub fn validate_plan(plan: &mut SfcwPlan, sut_period_s: f64) -> Result<usize> {
    plan.check_shape()?;
    if !(sut_period_s > 0.0 && sut_period_s.is_finite()) {
        return Err(Error::InvalidArgument(format!("SUT period must be positive, got {sut_period_s}")));
    }
    let ratio = plan.step_period_s / sut_period_s;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > PERIOD_TOL * ratio {
        return Err(Error::PeriodMismatch { step_period_s: plan.step_period_s, sut_period_s });
    }
    let m = m as usize;
    plan.period_multiple_m = Some(m);
    Ok(m)
}

/// Frequency measured by step `n` (1-based): `f_step1 + (n-1) df + f_p - f_SBS`.
pub fn measured_frequency(plan: &SfcwPlan, n: usize, config: &LinkConfig) -> Result<f64> {
    if n == 0 || n > plan.n_steps {
        return Err(Error::IndexOutOfRange { index: n, len: plan.n_steps });
    }
    Ok(plan.step_frequency(n) + config.gain_center_hz())
}

/// Concatenated detector output of one full scan, plus the bookkeeping
/// needed to turn it back into a spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrace {
    pub detected: SampledSignal,
    pub plan: SfcwPlan,
    pub measured_freqs_hz: Vec<f64>,
    pub reference_freq_hz: f64,
    /// Detector output with the gain bypassed, one step long. Frequency
    /// shifts leave it unchanged, so it is the same for every step.
    pub baseline: Vec<f64>,
    /// Mean extra detected power caused by the reference tone in each step.
    pub reference_levels: Vec<f64>,
    pub optical_oversampling: usize,
    /// Position of sample 0 within the periodic scan, in samples.
    pub capture_offset_samples: usize,
}

impl RawTrace {
    pub fn step_len(&self) -> usize {
        self.baseline.len()
    }

    pub fn scan_len(&self) -> usize {
        self.step_len() * self.plan.n_steps
    }

    /// Samples of the periodic (repeating) scan starting at `offset`, as an
    /// oscilloscope capture that begins at an arbitrary time would see them.
    pub fn cyclic_capture(&self, offset: usize, len: usize) -> Result<RawTrace> {
        let src = self.detected.samples();
        let total = src.len();
        let start = (self.capture_offset_samples + offset) % total;
        let samples: Vec<f64> = (0..len).map(|i| src[(start + i) % total]).collect();
        Ok(RawTrace {
            detected: SampledSignal::new(samples, self.detected.sample_rate_hz(), 0.0)?,
            capture_offset_samples: start,
            ..self.clone()
        })
    }

    /// Step (0-based) whose gain line is closest to the reference tone.
    pub fn reference_step(&self) -> usize {
        crate::spectrogram::nearest_index(&self.measured_freqs_hz, self.reference_freq_hz)
    }
}

/// Drive waveform: SUT plus a reference tone at twice the SUT peak, scaled
/// to unit peak. Returned with the reference-only drive on the same scale.
pub(crate) fn build_drive(sut_step: &SampledSignal, reference_freq_hz: f64) -> Result<(SampledSignal, SampledSignal)> {
    let fs = sut_step.sample_rate_hz();
    let peak = sut_step.peak_abs();
    let ref_amp = if peak > 0.0 { 2.0 * peak } else { 1.0 };
    let reference = tone_samples(reference_freq_hz, ref_amp, sut_step.len(), fs);
    let combined: Vec<f64> = sut_step.samples().iter().zip(&reference).map(|(s, r)| s + r).collect();
    let norm = combined.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let drive = SampledSignal::new(combined.iter().map(|v| v / norm).collect(), fs, 0.0)?;
    let ref_only = SampledSignal::new(reference.iter().map(|v| v / norm).collect(), fs, 0.0)?;
    Ok((drive, ref_only))
}

pub(crate) fn upsample(signal: &SampledSignal, factor: usize) -> Result<SampledSignal> {
    SampledSignal::new(
        dsp::upsample_periodic(signal.samples(), factor),
        signal.sample_rate_hz() * factor as f64,
        signal.t0_s(),
    )
}

/// Simulate one full SFCW scan of a periodic SUT.
///
/// `sut` holds whole SUT periods; it is repeated to fill each step. The plan
/// must have been through [`validate_plan`] for this SUT's period.
pub fn run_time_division(
    sut: &SampledSignal,
    reference_freq_hz: f64,
    plan: &SfcwPlan,
    config: &LinkConfig,
) -> Result<RawTrace> {
    plan.check_shape()?;
    config.validate()?;
    let m = plan.period_multiple_m.ok_or(Error::PlanNotValidated)?;
    let fs = sut.sample_rate_hz();
    let step_len = whole_samples(plan.step_period_s, fs)?;
    if step_len % sut.len() != 0 {
        return Err(Error::PeriodMismatch { step_period_s: plan.step_period_s, sut_period_s: sut.duration_s() });
    }
    let reps = step_len / sut.len();
    if reps > m || m % reps != 0 {
        return Err(Error::PlanNotValidated);
    }
    if !(reference_freq_hz > 0.0 && reference_freq_hz < 0.5 * fs) {
        return Err(Error::NyquistViolation(format!(
            "reference {reference_freq_hz} Hz outside (0, {}) Hz",
            0.5 * fs
        )));
    }
    let sut_step = tile_periodic(sut, reps);
    let (drive, ref_only) = build_drive(&sut_step, reference_freq_hz)?;

    let carriers: Vec<f64> = (1..=plan.n_steps).map(|n| -plan.step_frequency(n)).collect();
    let max_carrier = carriers.iter().fold(0.0_f64, |a, c| a.max(c.abs()));
    let os = config.oversampling_for(fs, max_carrier, drive.spectral_extent_hz());
    let drive_opt = upsample(&drive, os)?;
    let ref_opt = upsample(&ref_only, os)?;

    let baseline = dsp::decimate(&photonic::bypass_baseline(&drive_opt, config)?, os);
    let steps = photonic::detect_many(&drive_opt, &carriers, os, config, config.execution)?;
    let reference_levels = config
        .execution
        .try_map(carriers.len(), |i| photonic::stationary_excess(&ref_opt, carriers[i], config))?;

    let mut detected = Vec::with_capacity(step_len * plan.n_steps);
    for s in steps {
        debug_assert_eq!(s.len(), step_len);
        detected.extend(s);
    }
    let measured_freqs_hz =
        (1..=plan.n_steps).map(|n| measured_frequency(plan, n, config)).collect::<Result<Vec<_>>>()?;
    Ok(RawTrace {
        detected: SampledSignal::new(detected, fs, 0.0)?,
        plan: plan.clone(),
        measured_freqs_hz,
        reference_freq_hz,
        baseline,
        reference_levels,
        optical_oversampling: os,
        capture_offset_samples: 0,
    })
}
