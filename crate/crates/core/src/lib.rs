//! Numerical simulator for photonic time-frequency analysis of microwave
//! signals by stimulated-Brillouin-scattering (SBS) frequency-to-time mapping.
//!
//! The signal under test (SUT) is modulated onto an optical carrier, and a
//! narrow Brillouin gain picks out one frequency at a time. The detector then
//! turns "which frequency" into "when a pulse occurs". Two links are modelled:
//!
//! - [`parallel_link`]: N branches, each frequency-shifted by a multiple of
//!   the branch spacing, each detecting one frequency bin continuously.
//! - [`timedivision`]: one fixed gain, scanned by a step-frequency
//!   continuous-wave (SFCW) carrier, with the SUT repeated every step.
//!   [`reconstruction`] turns the raw detector trace into a spectrogram.
//!
//! [`oracle`] provides an independent STFT ground truth and the comparison
//! metrics used to validate both links.
//!
//! Per-step and per-branch work is data-parallel. With the default `parallel`
//! feature it runs on rayon; [`Execution::Sequential`] (or building without
//! the feature) gives the single-threaded path. Both produce identical output.

// NaN-rejecting range checks are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dsp;
pub mod error;
pub mod exec;
pub mod oracle;
pub mod parallel_link;
pub mod photonic;
pub mod reconstruction;
pub mod spectrogram;
pub mod timedivision;
pub mod waveforms;

pub use error::{Error, Result};
pub use exec::Execution;
pub use oracle::{
    compare_ridges, min_resolvable_separation, stft, stft_raw, truth_agreement, two_tone_resolvability,
    Resolvability, RidgeStats, SeparationSearch, StftParams, TruthStats, WindowFn,
};
pub use parallel_link::{
    branch_frequency, branch_row, parallel_oversampling, run_parallel, run_parallel_raw, BranchPlan,
};
pub use photonic::{
    apply_sbs, modulate_cs_dsb, photodetect, sbs_gain_response, shift_cs_ssb, ComplexEnvelope,
    GainPhase, LinkConfig, SbsGainProfile, ShiftDirection,
};
pub use reconstruction::{
    extract_frame, find_reference_pulse, pulse_fwhm_s, reconstruct, ridge, segment_and_stack,
    segment_and_stack_raw, Frame, PulseDetection, Ridge, DEFAULT_MIN_HEIGHT_RATIO,
    DEFAULT_MIN_WIDTH_RATIO,
};
pub use spectrogram::{Normalization, Spectrogram};
pub use timedivision::{measured_frequency, run_time_division, validate_plan, RawTrace, SfcwPlan};
pub use waveforms::{
    instantaneous_frequency, sum, synthesize, tile_periodic, Hop, SampledSignal, SignalSpec,
};
