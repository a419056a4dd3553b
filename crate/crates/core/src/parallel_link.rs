//! Real-time architecture: N branches, each frequency-shifted so that its
//! gain line sits on one frequency bin of the SUT, all detecting at once.
//!
//! Branch `k` places its probe carrier at `s_k = (f_pump - f_SBS) - f_k`, so
//! the upper sideband of a SUT component at `f_k` lands on the gain centre.
//! The sign of `s_k` picks the shifter direction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::photonic::{self, LinkConfig, ShiftDirection};
use crate::spectrogram::Spectrogram;
use crate::timedivision::upsample;
use crate::waveforms::SampledSignal;

/// Salt separating the jitter stream from the detector noise streams.
const JITTER_SALT: u64 = 0x6a69_7474_6572;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchPlan {
    /// Frequency measured by branch 0.
    pub f_base_hz: f64,
    pub delta_f_hz: f64,
    pub n_branches: usize,
    pub direction: ShiftDirection,
}

impl BranchPlan {
    pub fn new(f_base_hz: f64, delta_f_hz: f64, n_branches: usize, direction: ShiftDirection) -> Result<Self> {
        let p = Self { f_base_hz, delta_f_hz, n_branches, direction };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_f_hz > 0.0 && self.delta_f_hz.is_finite()) {
            return Err(Error::InvalidPlan(format!("branch spacing must be positive, got {}", self.delta_f_hz)));
        }
        if self.n_branches == 0 {
            return Err(Error::InvalidPlan("at least one branch is required".into()));
        }
        if !self.f_base_hz.is_finite() {
            return Err(Error::InvalidPlan("base frequency must be finite".into()));
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n_branches).map(|k| self.f_base_hz + self.direction.sign() * k as f64 * self.delta_f_hz).collect()
    }
}

/// Frequency measured by branch `k` (0-based): `f_base +/- k df`.
pub fn branch_frequency(plan: &BranchPlan, k: usize) -> Result<f64> {
    if k >= plan.n_branches {
        return Err(Error::IndexOutOfRange { index: k, len: plan.n_branches });
    }
    Ok(plan.f_base_hz + plan.direction.sign() * k as f64 * plan.delta_f_hz)
}

/// Frequency error of each branch's shifter, uniform in `+/- branch_jitter_hz`.
pub fn branch_offsets(plan: &BranchPlan, config: &LinkConfig) -> Vec<f64> {
    let j = config.branch_jitter_hz;
    (0..plan.n_branches)
        .map(|k| {
            if j > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(dsp::mix_seed(config.rng_seed ^ JITTER_SALT, k as u64));
                rng.random_range(-j..=j)
            } else {
                0.0
            }
        })
        .collect()
}

struct Prepared {
    drive: SampledSignal,
    carriers: Vec<f64>,
    oversampling: usize,
    baseline: Vec<f64>,
}

fn prepare(sut: &SampledSignal, plan: &BranchPlan, config: &LinkConfig) -> Result<Prepared> {
    plan.validate()?;
    config.validate()?;
    let peak = sut.peak_abs();
    let drive = if peak > 0.0 { sut.scaled(1.0 / peak) } else { sut.clone() };
    let c = config.gain_center_hz();
    let offsets = branch_offsets(plan, config);
    let carriers: Vec<f64> = plan.frequencies().iter().zip(&offsets).map(|(f, e)| c - (f + e)).collect();
    let max_carrier = carriers.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    let os = config.oversampling_for(sut.sample_rate_hz(), max_carrier, drive.spectral_extent_hz());
    let drive = upsample(&drive, os)?;
    let baseline = dsp::decimate(&photonic::bypass_baseline(&drive, config)?, os);
    Ok(Prepared { drive, carriers, oversampling: os, baseline })
}

fn excess(detected: &[f64], baseline: &[f64], dec: usize) -> Vec<f64> {
    let row: Vec<f64> = detected.iter().zip(baseline).map(|(x, b)| (x - b).max(0.0)).collect();
    dsp::decimate(&row, dec)
}

/// Detector trace of branch `k` alone, on the output time grid.
pub fn branch_row(sut: &SampledSignal, plan: &BranchPlan, config: &LinkConfig, k: usize) -> Result<Vec<f64>> {
    branch_frequency(plan, k)?;
    let p = prepare(sut, plan, config)?;
    let cfg = config.with_seed(dsp::mix_seed(config.rng_seed, k as u64));
    let det = photonic::detect_through_gain(&p.drive, p.carriers[k], p.oversampling, &cfg)?;
    Ok(excess(&det, &p.baseline, config.output_decimation(sut.sample_rate_hz())))
}

/// All branches, rows ordered by ascending frequency, not normalized.
pub fn run_parallel_raw(sut: &SampledSignal, plan: &BranchPlan, config: &LinkConfig) -> Result<Spectrogram> {
    let p = prepare(sut, plan, config)?;
    let fs = sut.sample_rate_hz();
    let dec = config.output_decimation(fs);
    let detected = photonic::detect_many(&p.drive, &p.carriers, p.oversampling, config, config.execution)?;
    let mut rows: Vec<Vec<f64>> = detected.iter().map(|d| excess(d, &p.baseline, dec)).collect();
    let mut freqs = plan.frequencies();
    if plan.direction == ShiftDirection::Down {
        rows.reverse();
        freqs.reverse();
    }
    let times = (0..rows[0].len()).map(|i| sut.t0_s() + (i * dec) as f64 / fs).collect();
    Spectrogram::from_rows(rows, freqs, times)
}

/// All branches stacked into a spectrogram normalized to its global maximum.
pub fn run_parallel(sut: &SampledSignal, plan: &BranchPlan, config: &LinkConfig) -> Result<Spectrogram> {
    Ok(run_parallel_raw(sut, plan, config)?.normalized())
}

/// Optical oversampling the parallel link would use for this SUT and plan.
pub fn parallel_oversampling(sut: &SampledSignal, plan: &BranchPlan, config: &LinkConfig) -> Result<usize> {
    Ok(prepare(sut, plan, config)?.oversampling)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveforms::{synthesize, SignalSpec};

    #[test]
    fn branch_frequency_examples() {
        let up = BranchPlan::new(0.5e9, 0.5e9, 20, ShiftDirection::Up).unwrap();
        assert_eq!(branch_frequency(&up, 0).unwrap(), 0.5e9);
        assert_eq!(branch_frequency(&up, 19).unwrap(), 10e9);
        assert!(matches!(branch_frequency(&up, 20), Err(Error::IndexOutOfRange { .. })));
        let down = BranchPlan::new(2e9, 25e6, 4, ShiftDirection::Down).unwrap();
        assert_eq!(branch_frequency(&down, 1).unwrap(), 2e9 - 25e6);
        assert!(BranchPlan::new(1e9, 0.0, 4, ShiftDirection::Up).is_err());
    }

    #[test]
    fn single_bin_excitation() {
        let fs = 10e9;
        let sut = synthesize(&SignalSpec::Tone { f_hz: 1.1e9, period_s: 0.4e-6 }, fs, 1).unwrap();
        let plan = BranchPlan::new(1e9, 50e6, 5, ShiftDirection::Up).unwrap();
        let s = run_parallel(&sut, &plan, &LinkConfig::default()).unwrap();
        let energy: Vec<f64> = s.rows().map(|r| r.iter().sum()).collect();
        let j = s.nearest_row(1.1e9);
        for (i, e) in energy.iter().enumerate() {
            if i != j {
                assert!(*e < 0.01 * energy[j], "{energy:?}");
            }
        }
    }

    #[test]
    fn down_direction_rows_ascend() {
        let fs = 10e9;
        let sut = synthesize(&SignalSpec::Tone { f_hz: 1e9, period_s: 0.1e-6 }, fs, 1).unwrap();
        let plan = BranchPlan::new(1.1e9, 50e6, 4, ShiftDirection::Down).unwrap();
        let s = run_parallel(&sut, &plan, &LinkConfig::default()).unwrap();
        assert_eq!(s.freq_axis_hz(), &[0.95e9, 1e9, 1.05e9, 1.1e9]);
        assert_eq!(s.nearest_row(1e9), 1);
        let e: Vec<f64> = s.rows().map(|r| r.iter().sum()).collect();
        assert!(e[1] > 10.0 * e[0] && e[1] > 10.0 * e[2]);
    }

    #[test]
    fn jitter_is_bounded_and_seeded() {
        let plan = BranchPlan::new(1e9, 50e6, 8, ShiftDirection::Up).unwrap();
        let cfg = LinkConfig { branch_jitter_hz: 1e6, rng_seed: 9, ..LinkConfig::default() };
        let a = branch_offsets(&plan, &cfg);
        assert_eq!(a, branch_offsets(&plan, &cfg));
        assert!(a.iter().all(|e| e.abs() <= 1e6));
        assert!(a.iter().any(|e| *e != 0.0));
        assert!(branch_offsets(&plan, &LinkConfig::default()).iter().all(|e| *e == 0.0));
    }
}
