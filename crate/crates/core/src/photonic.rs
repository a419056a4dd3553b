//! Complex-baseband models of the optical chain.
//!
//! Optical fields are represented relative to the laser frequency `f_c`, which
//! sits at 0 Hz. Each element is ideal and memoryless except for the Brillouin
//! gain, which is a steady-state linear filter:
//!
//! - null-biased MZM (carrier-suppressed double sideband, CS-DSB)
//! - DP-MZM frequency shifter (carrier-suppressed single sideband, CS-SSB)
//! - Lorentzian SBS gain
//! - square-law photodetector with a low-pass response and additive noise

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::waveforms::{same_rate, SampledSignal};

/// Complex optical field at baseband relative to the laser frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexEnvelope {
    samples: Vec<Complex64>,
    sample_rate_hz: f64,
    carrier_offset_hz: f64,
    half_bandwidth_hz: f64,
}

impl ComplexEnvelope {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64, carrier_offset_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::InvalidArgument("envelope needs at least one sample".into()));
        }
        Ok(Self { samples, sample_rate_hz, carrier_offset_hz, half_bandwidth_hz: 0.0 })
    }

    /// Unmodulated unit-amplitude carrier at 0 Hz.
    pub fn unit_carrier(len: usize, sample_rate_hz: f64) -> Result<Self> {
        Self::new(vec![Complex64::new(1.0, 0.0); len], sample_rate_hz, 0.0)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Nominal carrier position relative to `f_c`.
    pub fn carrier_offset_hz(&self) -> f64 {
        self.carrier_offset_hz
    }

    /// Modulation content extends this far either side of the carrier.
    pub fn half_bandwidth_hz(&self) -> f64 {
        self.half_bandwidth_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|c| c.norm_sqr()).sum()
    }

    /// DFT of the field, bin `k` at [`dsp::bin_frequency`].
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.samples.clone();
        dsp::fft(&mut buf);
        buf
    }

    fn nyquist_hz(&self) -> f64 {
        0.5 * self.sample_rate_hz
    }
}

/// Direction of a CS-SSB frequency shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftDirection {
    Up,
    Down,
}

impl ShiftDirection {
    pub fn sign(self) -> f64 {
        match self {
            ShiftDirection::Up => 1.0,
            ShiftDirection::Down => -1.0,
        }
    }
}

/// Phase model used when the gain is applied to a field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainPhase {
    /// Magnitude of the complex Lorentzian only: no group delay, pulses stay
    /// centred on the frequency crossing.
    #[default]
    ZeroPhase,
    /// Full complex Lorentzian (gain plus the associated Kramers-Kronig
    /// phase). Causal, with a group delay of `g / (2 pi fwhm)` on resonance.
    Causal,
}

/// Brillouin gain line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbsGainProfile {
    /// Gain centre relative to `f_c`.
    pub center_offset_hz: f64,
    /// Full width at half maximum of the Lorentzian, Gamma.
    pub fwhm_hz: f64,
    /// Power gain on resonance.
    pub peak_gain_db: f64,
    #[serde(default)]
    pub phase: GainPhase,
}

impl SbsGainProfile {
    pub fn new(center_offset_hz: f64, fwhm_hz: f64, peak_gain_db: f64) -> Result<Self> {
        let p = Self { center_offset_hz, fwhm_hz, peak_gain_db, phase: GainPhase::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn with_phase(mut self, phase: GainPhase) -> Self {
        self.phase = phase;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm_hz > 0.0 && self.fwhm_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!("gain FWHM must be positive, got {}", self.fwhm_hz)));
        }
        if !(self.peak_gain_db > 0.0 && self.peak_gain_db.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "peak gain must be positive, got {} dB",
                self.peak_gain_db
            )));
        }
        Ok(())
    }

    /// Natural-log power gain on resonance, `ln(10^(dB/10))`.
    pub fn log_gain(&self) -> f64 {
        self.peak_gain_db / 10.0 * std::f64::consts::LN_10
    }

    /// Field transfer at `detuning_hz` from the gain centre under the
    /// configured phase model.
    pub fn transfer(&self, detuning_hz: f64) -> Complex64 {
        let h = sbs_gain_response(self, detuning_hz);
        match self.phase {
            GainPhase::Causal => h,
            GainPhase::ZeroPhase => Complex64::new(h.norm(), 0.0),
        }
    }

    /// Power gain (linear) at `detuning_hz`.
    pub fn power_gain(&self, detuning_hz: f64) -> f64 {
        sbs_gain_response(self, detuning_hz).norm_sqr()
    }
}

/// Complex field gain of the SBS line at `detuning_hz` from its centre:
/// `exp((g/2) / (1 + 2j detuning / fwhm))` with `g` the natural-log peak
/// power gain. Tends to 1 far from resonance.
pub fn sbs_gain_response(profile: &SbsGainProfile, detuning_hz: f64) -> Complex64 {
    let x = 2.0 * detuning_hz / profile.fwhm_hz;
    let exponent = Complex64::new(0.5 * profile.log_gain(), 0.0) / Complex64::new(1.0, x);
    exponent.exp()
}

fn default_f_sbs() -> f64 {
    10.8e9
}
fn default_f_pump() -> f64 {
    10.85e9
}
fn default_fwhm() -> f64 {
    20e6
}
fn default_peak_gain() -> f64 {
    20.0
}
fn default_index() -> f64 {
    0.1
}

/// Physical and numerical parameters shared by every element of a link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    /// Brillouin frequency shift of the fibre.
    #[serde(default = "default_f_sbs")]
    pub f_sbs_hz: f64,
    /// RF frequency that shifts the pump up from `f_c`.
    #[serde(default = "default_f_pump")]
    pub f_pump_offset_hz: f64,
    /// Brillouin gain bandwidth Gamma.
    #[serde(default = "default_fwhm")]
    pub gain_fwhm_hz: f64,
    #[serde(default = "default_peak_gain")]
    pub peak_gain_db: f64,
    #[serde(default)]
    pub gain_phase: GainPhase,
    #[serde(default = "default_index")]
    pub modulation_index: f64,
    /// Detector low-pass cutoff; 4 Gamma when unset.
    #[serde(default)]
    pub detector_lpf_hz: Option<f64>,
    /// Sample rate of spectrogram columns; 4x the detector cutoff when unset.
    #[serde(default)]
    pub output_rate_hz: Option<f64>,
    /// RMS of additive Gaussian detector noise; 0 disables.
    #[serde(default)]
    pub noise_rms: f64,
    #[serde(default)]
    pub rng_seed: u64,
    /// Integer factor between the optical and RF sample rates; chosen
    /// automatically from the occupied band when unset.
    #[serde(default)]
    pub optical_oversampling: Option<usize>,
    /// Peak uniform error of each parallel branch's frequency shift.
    #[serde(default)]
    pub branch_jitter_hz: f64,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            f_sbs_hz: default_f_sbs(),
            f_pump_offset_hz: default_f_pump(),
            gain_fwhm_hz: default_fwhm(),
            peak_gain_db: default_peak_gain(),
            gain_phase: GainPhase::default(),
            modulation_index: default_index(),
            detector_lpf_hz: None,
            output_rate_hz: None,
            noise_rms: 0.0,
            rng_seed: 0,
            optical_oversampling: None,
            branch_jitter_hz: 0.0,
            execution: Execution::default(),
        }
    }
}

impl LinkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.modulation_index > 0.0 && self.modulation_index <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "modulation index must be in (0, 1], got {}",
                self.modulation_index
            )));
        }
        self.gain_profile().validate()?;
        if !(self.detector_lpf_hz() > 0.0) {
            return Err(Error::InvalidArgument("detector cutoff must be positive".into()));
        }
        if !(self.output_rate_hz() > 0.0) {
            return Err(Error::InvalidArgument("output rate must be positive".into()));
        }
        if !(self.noise_rms >= 0.0) || !(self.branch_jitter_hz >= 0.0) {
            return Err(Error::InvalidArgument("noise and jitter must be non-negative".into()));
        }
        if self.optical_oversampling == Some(0) {
            return Err(Error::InvalidArgument("optical oversampling must be positive".into()));
        }
        Ok(())
    }

    /// Gain centre relative to `f_c`: `f_pump - f_SBS`.
    pub fn gain_center_hz(&self) -> f64 {
        self.f_pump_offset_hz - self.f_sbs_hz
    }

    pub fn gain_profile(&self) -> SbsGainProfile {
        SbsGainProfile {
            center_offset_hz: self.gain_center_hz(),
            fwhm_hz: self.gain_fwhm_hz,
            peak_gain_db: self.peak_gain_db,
            phase: self.gain_phase,
        }
    }

    pub fn detector_lpf_hz(&self) -> f64 {
        self.detector_lpf_hz.unwrap_or(4.0 * self.gain_fwhm_hz)
    }

    pub fn output_rate_hz(&self) -> f64 {
        self.output_rate_hz.unwrap_or(4.0 * self.detector_lpf_hz())
    }

    /// Copy with every defaulted field written out explicitly.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.detector_lpf_hz = Some(self.detector_lpf_hz());
        out.output_rate_hz = Some(self.output_rate_hz());
        out
    }

    /// Same configuration with the detector noise seed replaced.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.rng_seed = seed;
        out
    }

    /// Oversampling factor for a link whose carriers sit at most
    /// `max_carrier_hz` from `f_c` and whose drive reaches `drive_extent_hz`.
    ///
    /// Both first-order sidebands must stay inside the optical Nyquist band
    /// with a 10 % margin.
    pub fn oversampling_for(&self, rf_rate_hz: f64, max_carrier_hz: f64, drive_extent_hz: f64) -> usize {
        if let Some(os) = self.optical_oversampling {
            return os;
        }
        let needed = 2.0 * 1.1 * (max_carrier_hz.abs() + drive_extent_hz);
        ((needed / rf_rate_hz).ceil() as usize).max(1)
    }

    /// Decimation from `rate_hz` to the spectrogram column rate.
    pub fn output_decimation(&self, rate_hz: f64) -> usize {
        ((rate_hz / self.output_rate_hz()).floor() as usize).max(1)
    }
}

/// Null-biased MZM: `E_out = E_in * sin(index * pi/2 * v)`.
///
/// `drive` is the normalized RF drive (nominally within [-1, 1]). The
/// transfer is kept in full so higher orders appear at large index.
pub fn modulate_cs_dsb(
    carrier: &ComplexEnvelope,
    drive: &SampledSignal,
    modulation_index: f64,
) -> Result<ComplexEnvelope> {
    if !same_rate(carrier.sample_rate_hz, drive.sample_rate_hz()) {
        return Err(Error::RateMismatch(carrier.sample_rate_hz, drive.sample_rate_hz()));
    }
    if carrier.len() != drive.len() {
        return Err(Error::LengthMismatch(carrier.len(), drive.len()));
    }
    if !(modulation_index > 0.0 && modulation_index <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "modulation index must be in (0, 1], got {modulation_index}"
        )));
    }
    let half_bw = carrier.half_bandwidth_hz + drive.spectral_extent_hz();
    if carrier.carrier_offset_hz.abs() + half_bw >= carrier.nyquist_hz() {
        return Err(Error::NyquistViolation(format!(
            "sidebands at {} +/- {} Hz exceed the optical Nyquist band of +/- {} Hz",
            carrier.carrier_offset_hz,
            half_bw,
            carrier.nyquist_hz()
        )));
    }
    let k = modulation_index * PI / 2.0;
    let samples = carrier
        .samples
        .iter()
        .zip(drive.samples())
        .map(|(&e, &v)| e * (k * v).sin())
        .collect();
    Ok(ComplexEnvelope {
        samples,
        sample_rate_hz: carrier.sample_rate_hz,
        carrier_offset_hz: carrier.carrier_offset_hz,
        half_bandwidth_hz: half_bw,
    })
}

/// Ideal CS-SSB modulator: multiply by `exp(+/- j 2 pi shift t)`.
pub fn shift_cs_ssb(field: &ComplexEnvelope, shift_hz: f64, direction: ShiftDirection) -> Result<ComplexEnvelope> {
    if !(shift_hz >= 0.0 && shift_hz.is_finite()) {
        return Err(Error::InvalidArgument(format!("shift must be non-negative, got {shift_hz}")));
    }
    let signed = direction.sign() * shift_hz;
    let new_offset = field.carrier_offset_hz + signed;
    if new_offset.abs() + field.half_bandwidth_hz >= field.nyquist_hz() {
        return Err(Error::NyquistViolation(format!(
            "shifted content at {new_offset} +/- {} Hz exceeds the optical Nyquist band of +/- {} Hz",
            field.half_bandwidth_hz,
            field.nyquist_hz()
        )));
    }
    let fs = field.sample_rate_hz;
    let samples = if signed == 0.0 {
        field.samples.clone()
    } else {
        field
            .samples
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                let phase = dsp::cycles_to_phase(signed * i as f64 / fs);
                e * Complex64::from_polar(1.0, phase)
            })
            .collect()
    };
    Ok(ComplexEnvelope {
        samples,
        sample_rate_hz: fs,
        carrier_offset_hz: new_offset,
        half_bandwidth_hz: field.half_bandwidth_hz,
    })
}

/// Steady-state SBS interaction: the probe spectrum is multiplied by the
/// gain transfer bin by bin (circularly, over the record).
pub fn apply_sbs(probe: &ComplexEnvelope, profile: &SbsGainProfile) -> Result<ComplexEnvelope> {
    profile.validate()?;
    if profile.center_offset_hz.abs() >= probe.nyquist_hz() {
        return Err(Error::NyquistViolation(format!(
            "gain centre {} Hz outside the optical Nyquist band of +/- {} Hz",
            profile.center_offset_hz,
            probe.nyquist_hz()
        )));
    }
    let n = probe.len();
    let fs = probe.sample_rate_hz;
    let mut spec = probe.spectrum();
    for (k, v) in spec.iter_mut().enumerate() {
        let f = dsp::bin_frequency(k, n, fs);
        *v *= profile.transfer(f - profile.center_offset_hz);
    }
    dsp::ifft(&mut spec);
    Ok(ComplexEnvelope { samples: spec, ..probe.clone_meta() })
}

impl ComplexEnvelope {
    fn clone_meta(&self) -> Self {
        Self {
            samples: Vec::new(),
            sample_rate_hz: self.sample_rate_hz,
            carrier_offset_hz: self.carrier_offset_hz,
            half_bandwidth_hz: self.half_bandwidth_hz,
        }
    }
}

/// Square-law detection: `LPF(|E|^2) + n`, at the field's sample rate.
///
/// The low-pass is a linear-phase FIR applied with its delay removed. Noise
/// is Gaussian with RMS `noise_rms`, seeded from `rng_seed`.
pub fn photodetect(field: &ComplexEnvelope, config: &LinkConfig) -> Result<SampledSignal> {
    let fs = field.sample_rate_hz;
    let cutoff = config.detector_lpf_hz();
    if !(cutoff > 0.0 && cutoff < 0.5 * fs) {
        return Err(Error::InvalidArgument(format!(
            "detector cutoff {cutoff} Hz must lie in (0, {}) Hz",
            0.5 * fs
        )));
    }
    let power: Vec<f64> = field.samples.iter().map(|c| c.norm_sqr()).collect();
    let mut out = dsp::lowpass_periodic(&power, fs, cutoff);
    if config.noise_rms > 0.0 {
        let normal = Normal::new(0.0, config.noise_rms)
            .map_err(|e| Error::InvalidArgument(format!("noise: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        for v in out.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    SampledSignal::new(out, fs, 0.0)
}

/// Detector output with the gain bypassed: the level that pulses sit on.
/// Frequency shifts do not change it, so one evaluation serves every step
/// or branch driven by the same waveform.
pub(crate) fn bypass_baseline(drive: &SampledSignal, config: &LinkConfig) -> Result<Vec<f64>> {
    let carrier = ComplexEnvelope::unit_carrier(drive.len(), drive.sample_rate_hz())?;
    let modulated = modulate_cs_dsb(&carrier, drive, config.modulation_index)?;
    let quiet = config.with_seed(0);
    let quiet = LinkConfig { noise_rms: 0.0, ..quiet };
    Ok(photodetect(&modulated, &quiet)?.into_samples())
}

/// One pass through shifter, modulator, gain and detector, decimated back
/// to the RF grid. `carrier_hz` is the signed carrier position after the
/// CS-SSB shifter.
pub(crate) fn detect_through_gain(
    drive_optical: &SampledSignal,
    carrier_hz: f64,
    oversampling: usize,
    config: &LinkConfig,
) -> Result<Vec<f64>> {
    let carrier = ComplexEnvelope::unit_carrier(drive_optical.len(), drive_optical.sample_rate_hz())?;
    let direction = if carrier_hz >= 0.0 { ShiftDirection::Up } else { ShiftDirection::Down };
    let shifted = shift_cs_ssb(&carrier, carrier_hz.abs(), direction)?;
    let modulated = modulate_cs_dsb(&shifted, drive_optical, config.modulation_index)?;
    let amplified = apply_sbs(&modulated, &config.gain_profile())?;
    let detected = photodetect(&amplified, config)?;
    Ok(dsp::decimate(detected.samples(), oversampling))
}

/// Mean detected power with and without the gain for a drive whose response
/// is stationary (a tone). Returns the excess caused by the gain.
pub(crate) fn stationary_excess(
    drive_optical: &SampledSignal,
    carrier_hz: f64,
    config: &LinkConfig,
) -> Result<f64> {
    let carrier = ComplexEnvelope::unit_carrier(drive_optical.len(), drive_optical.sample_rate_hz())?;
    let direction = if carrier_hz >= 0.0 { ShiftDirection::Up } else { ShiftDirection::Down };
    let shifted = shift_cs_ssb(&carrier, carrier_hz.abs(), direction)?;
    let modulated = modulate_cs_dsb(&shifted, drive_optical, config.modulation_index)?;
    let profile = config.gain_profile();
    let n = modulated.len();
    let fs = modulated.sample_rate_hz;
    let spec = modulated.spectrum();
    // Parseval: mean |E|^2 = sum |X_k|^2 / N^2
    let mut gained = 0.0;
    let mut bypass = 0.0;
    for (k, x) in spec.iter().enumerate() {
        let p = x.norm_sqr();
        bypass += p;
        let f = dsp::bin_frequency(k, n, fs);
        gained += p * profile.transfer(f - profile.center_offset_hz).norm_sqr();
    }
    let norm = (n as f64) * (n as f64);
    Ok((gained - bypass) / norm)
}

/// Detector outputs for many carrier positions of the same drive, in order.
pub(crate) fn detect_many(
    drive_optical: &SampledSignal,
    carriers_hz: &[f64],
    oversampling: usize,
    config: &LinkConfig,
    execution: Execution,
) -> Result<Vec<Vec<f64>>> {
    execution.try_map(carriers_hz.len(), |i| {
        let cfg = config.with_seed(dsp::mix_seed(config.rng_seed, i as u64));
        detect_through_gain(drive_optical, carriers_hz[i], oversampling, &cfg)
    })
}
