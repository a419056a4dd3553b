//! End-to-end properties of the time-division and parallel pipelines.

use proptest::prelude::*;
use sbs_tfa::oracle::SeparationSearch;
use sbs_tfa::*;

const FS: f64 = 10e9;
const GAMMA: f64 = 20e6;

struct Run {
    tf: Spectrogram,
    frame: Frame,
}

fn td_run(sut: &SampledSignal, period_s: f64, f_first: f64, delta: f64, n_steps: usize, step_s: f64, cfg: &LinkConfig) -> Run {
    let mut plan = SfcwPlan::measuring_from(f_first, delta, step_s, n_steps, cfg).unwrap();
    validate_plan(&mut plan, period_s).unwrap();
    let trace = run_time_division(sut, f_first, &plan, cfg).unwrap();
    let anchor = find_reference_pulse(&trace, DEFAULT_MIN_HEIGHT_RATIO, DEFAULT_MIN_WIDTH_RATIO).unwrap();
    let frame = extract_frame(&trace, &anchor).unwrap();
    let tf = segment_and_stack(&frame, cfg).unwrap();
    Run { tf, frame }
}

fn lfm(f0: f64, f1: f64, period_s: f64) -> SignalSpec {
    SignalSpec::Lfm { f_start_hz: f0, f_end_hz: f1, period_s }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn full_rate_excess(frame: &Frame, n: usize) -> Vec<f64> {
    let l = frame.baseline.len();
    let x = frame.signal.samples();
    (0..l).map(|i| x[n * l + i] - frame.baseline[i] - frame.reference_levels[n]).collect()
}

#[test]
fn tone_round_trip_lands_on_nearest_row() {
    let cfg = LinkConfig::default();
    let f: f64 = 1.2437e9;
    let period = 0.4e-6;
    // a tone needs whole cycles per period to be periodic
    let f = (f * period).round() / period;
    let sut = synthesize(&SignalSpec::Tone { f_hz: f, period_s: period }, FS, 1).unwrap();
    let run = td_run(&sut, period, 1.1e9, 10e6, 31, period, &cfg);
    let axis = run.tf.freq_axis_hz();
    let expect = run.tf.nearest_row(f);
    for c in 0..run.tf.n_time() {
        let col = run.tf.column(c);
        assert_eq!(argmax(&col), expect, "column {c}: row {} vs {}", axis[argmax(&col)], axis[expect]);
    }
}

#[test]
fn steps_do_not_leak_into_each_other() {
    let cfg = LinkConfig::default();
    let period = 0.5e-6;
    let spec = lfm(0.2e9, 1.2e9, period);
    let sut = synthesize(&spec, FS, 1).unwrap();
    let delta = 25e6;
    let run = td_run(&sut, period, 0.15e9, delta, 41, period, &cfg);
    let full = segment_and_stack_raw(&run.frame, &cfg).unwrap();
    let dec = cfg.output_decimation(FS);
    // filter length in output columns, from the taps of the detector low-pass
    let edge = (11.0 / cfg.detector_lpf_hz().max(1.0) * FS / dec as f64).ceil() as usize + 1;
    for n in [8usize, 20, 33] {
        let f_n = run.frame.measured_freqs_hz[n];
        let mut one = SfcwPlan::new(run.frame.plan.step_frequency(n + 1), delta, period, 1).unwrap();
        validate_plan(&mut one, period).unwrap();
        let t = run_time_division(&sut, 0.15e9, &one, &cfg).unwrap();
        let iso: Vec<f64> = t
            .detected
            .samples()
            .iter()
            .zip(&t.baseline)
            .map(|(x, b)| (x - b - t.reference_levels[0]).max(0.0))
            .step_by(dec)
            .collect();
        let row = full.row(full.nearest_row(f_n));
        assert_eq!(row.len(), iso.len());
        let peak = iso.iter().copied().fold(0.0, f64::max);
        assert!(peak > 0.0);
        for i in edge..iso.len() - edge {
            assert!((row[i] - iso[i]).abs() <= 1e-6 * peak, "step {n} column {i}: {} vs {}", row[i], iso[i]);
        }
    }
}

#[test]
fn lfm_pulse_occurs_at_predicted_time() {
    let cfg = LinkConfig::default();
    let (f0, f1, period) = (0.1e9, 4e9, 2e-6);
    let k = (f1 - f0) / period;
    let sut = synthesize(&lfm(f0, f1, period), FS, 1).unwrap();
    let run = td_run(&sut, period, 100e6, 100e6, 40, period, &cfg);
    let l = run.frame.baseline.len();
    let mut checked = 0;
    for n in 0..run.frame.plan.n_steps {
        let f_n = run.frame.measured_freqs_hz[n];
        if (f_n - run.frame.reference_freq_hz).abs() <= 1.5 * GAMMA {
            continue;
        }
        let t_pred = (f_n - f0) / k;
        if !(100e-9..period - 100e-9).contains(&t_pred) {
            continue;
        }
        let row = full_rate_excess(&run.frame, n);
        let p = argmax(&row);
        let half = 0.5 * row[p];
        let lo = (0..p).rev().find(|&i| row[i] < half).unwrap_or(0);
        let hi = (p..l).find(|&i| row[i] < half).unwrap_or(l - 1);
        let fwhm = (hi - lo) as f64 / FS;
        let t_obs = p as f64 / FS;
        assert!((t_obs - t_pred).abs() <= 0.5 * fwhm, "step {n}: {t_obs} vs {t_pred}, fwhm {fwhm}");
        checked += 1;
    }
    assert!(checked > 30);
}

#[test]
fn reference_lights_steps_within_guard_band() {
    let cfg = LinkConfig::default();
    let period = 0.4e-6;
    let f_ref = 1e9;
    let sut = SampledSignal::zeros((period * FS).round() as usize, FS).unwrap();
    let mut plan = SfcwPlan::measuring_from(0.9e9, 5e6, period, 41, &cfg).unwrap();
    validate_plan(&mut plan, period).unwrap();
    let trace = run_time_division(&sut, f_ref, &plan, &cfg).unwrap();
    let l = trace.step_len();
    let x = trace.detected.samples();
    let level: Vec<f64> = (0..plan.n_steps)
        .map(|n| {
            // steady part of the step, away from the switching transients
            let s = &x[n * l + l / 4..n * l + 3 * l / 4];
            let b = &trace.baseline[l / 4..3 * l / 4];
            s.iter().zip(b).map(|(a, b)| a - b).sum::<f64>() / s.len() as f64
        })
        .collect();
    let profile = cfg.gain_profile();
    let excess = |d: f64| profile.power_gain(d) - 1.0;
    let peak_step = argmax(&level);
    let peak = level[peak_step];
    assert!((trace.measured_freqs_hz[peak_step] - f_ref).abs() < 1.0);
    let threshold = excess(1.5 * GAMMA) / excess(0.0);
    for (n, (&lv, &f)) in level.iter().zip(&trace.measured_freqs_hz).enumerate() {
        let d = f - f_ref;
        let expect = excess(d) / excess(0.0);
        let got = lv / peak;
        assert!((got - expect).abs() <= 2e-3 * expect.max(1e-3), "step {n}: {got} vs {expect}");
        let lit = got >= threshold * (1.0 - 1e-3);
        assert_eq!(lit, d.abs() <= 1.5 * GAMMA + 1.0, "step {n}, detuning {d}");
    }
}

#[test]
fn lfm_ridge_slope_matches_chirp_rate() {
    let cfg = LinkConfig::default();
    let (f0, f1, period) = (0.1e9, 4e9, 2e-6);
    let sut = synthesize(&lfm(f0, f1, period), FS, 1).unwrap();
    let n_steps = ((f1 - f0) / 25e6).round() as usize + 1;
    let run = td_run(&sut, period, f0, 25e6, n_steps, period, &cfg);
    let slope = ridge(&run.tf, 0.02).slope_hz_per_s(0.1e-6, 1.9e-6).unwrap();
    let k = (f1 - f0) / period;
    assert!((slope - k).abs() <= 0.05 * k, "{slope} vs {k}");
}

#[test]
fn stft_ridge_tracks_instantaneous_frequency() {
    let spec = lfm(0.1e9, 4e9, 2e-6);
    let s = stft(&synthesize(&spec, FS, 1).unwrap(), &StftParams::default()).unwrap();
    let bin = s.freq_axis_hz()[1] - s.freq_axis_hz()[0];
    let st = truth_agreement(&ridge(&s, 0.0), &spec, s.freq_axis_hz(), bin).unwrap();
    assert!(st.coverage >= 0.95, "{st:?}");
}

#[test]
fn execution_modes_agree_bit_for_bit() {
    let noisy = LinkConfig { noise_rms: 1e-4, rng_seed: 77, ..LinkConfig::default() };
    let seq = LinkConfig { execution: Execution::Sequential, ..noisy.clone() };
    let period = 0.5e-6;
    let sut = synthesize(&lfm(0.3e9, 1.3e9, period), FS, 1).unwrap();
    let mut plan = SfcwPlan::measuring_from(0.25e9, 50e6, period, 24, &noisy).unwrap();
    validate_plan(&mut plan, period).unwrap();
    let a = run_time_division(&sut, 0.25e9, &plan, &noisy).unwrap();
    let b = run_time_division(&sut, 0.25e9, &plan, &seq).unwrap();
    assert_eq!(a, b);

    let branches = BranchPlan::new(0.3e9, 50e6, 21, ShiftDirection::Up).unwrap();
    let pa = run_parallel_raw(&sut, &branches, &noisy).unwrap();
    let pb = run_parallel_raw(&sut, &branches, &seq).unwrap();
    assert_eq!(pa, pb);

    let params = StftParams::default();
    assert_eq!(stft_raw(&sut, &params, Execution::Parallel).unwrap(), stft_raw(&sut, &params, Execution::Sequential).unwrap());
}

#[test]
fn branch_rows_are_independent() {
    let cfg = LinkConfig { noise_rms: 1e-4, rng_seed: 3, ..LinkConfig::default() };
    let period = 0.5e-6;
    let sut = synthesize(&lfm(0.5e9, 1.5e9, period), FS, 1).unwrap();
    let plan = BranchPlan::new(0.5e9, 100e6, 11, ShiftDirection::Up).unwrap();
    let all = run_parallel_raw(&sut, &plan, &cfg).unwrap();
    for k in [0, 4, 10] {
        assert_eq!(all.row(k), branch_row(&sut, &plan, &cfg, k).unwrap().as_slice(), "branch {k}");
    }
    // dropping the last branch leaves the others untouched
    let fewer = BranchPlan { n_branches: 10, ..plan.clone() };
    assert_eq!(parallel_oversampling(&sut, &plan, &cfg).unwrap(), parallel_oversampling(&sut, &fewer, &cfg).unwrap());
    let part = run_parallel_raw(&sut, &fewer, &cfg).unwrap();
    for k in 0..10 {
        assert_eq!(all.row(k), part.row(k), "branch {k}");
    }
}

/// Largest change in columns before `t_stop` when the SUT is altered after
/// `t_change`.
fn early_change(phase: GainPhase, t_change: f64, t_stop: f64) -> (f64, f64) {
    let cfg = LinkConfig { gain_phase: phase, ..LinkConfig::default() };
    let period = 2e-6;
    let a = synthesize(&SignalSpec::Tone { f_hz: 1e9, period_s: period }, FS, 1).unwrap();
    let mut pert: Vec<f64> = a.samples().to_vec();
    for (i, v) in pert.iter_mut().enumerate() {
        let t = i as f64 / FS;
        if (t_change..t_change + 0.1e-6).contains(&t) {
            *v = 0.0;
        }
    }
    let b = SampledSignal::new(pert, FS, 0.0).unwrap();
    let plan = BranchPlan::new(0.95e9, 25e6, 5, ShiftDirection::Up).unwrap();
    let ra = run_parallel_raw(&a, &plan, &cfg).unwrap();
    let rb = run_parallel_raw(&b, &plan, &cfg).unwrap();
    let scale = ra.max();
    let mut worst: f64 = 0.0;
    for (c, &t) in ra.time_axis_s().iter().enumerate() {
        if (0.3e-6..t_stop).contains(&t) {
            for r in 0..ra.n_freq() {
                worst = worst.max((ra.get(r, c) - rb.get(r, c)).abs());
            }
        }
    }
    (worst, scale)
}

#[test]
fn causal_gain_keeps_columns_causal() {
    let cfg = LinkConfig::default();
    let t_change = 1.0e-6;
    // the detector low-pass is zero-phase, so it looks ahead by half its length
    let lookahead = 0.5 * 11.0 / cfg.detector_lpf_hz();
    let t_stop = t_change - lookahead - 5e-9;
    let (causal, scale) = early_change(GainPhase::Causal, t_change, t_stop);
    assert!(causal <= 1e-6 * scale, "{causal} of {scale}");
    let (zero_phase, _) = early_change(GainPhase::ZeroPhase, t_change, t_stop);
    assert!(zero_phase > 1e3 * causal.max(1e-15), "zero-phase gain should respond before the change");
}

#[test]
fn valley_ratio_falls_as_tones_separate() {
    let search = SeparationSearch::new(LinkConfig::default(), 5e6);
    let seps = [10e6, 15e6, 20e6, 25e6, 30e6, 40e6];
    let max_sep = 40e6;
    let ratios: Vec<f64> = seps.iter().map(|&s| search.evaluate(s, max_sep).unwrap().valley_ratio).collect();
    for w in ratios.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{ratios:?}");
    }
}

fn wide_grid() -> Vec<f64> {
    (2..=40).map(|i| i as f64 * 2.5e6).collect()
}

#[test]
fn coarse_steps_set_the_resolution() {
    // steps at least twice the gain bandwidth: the grid spacing dominates
    let delta = 2.0 * GAMMA;
    let got = min_resolvable_separation(&SeparationSearch::new(LinkConfig::default(), delta), &wide_grid()).unwrap();
    assert!(got >= delta - 2.5e6 && got <= 2.0 * delta + 2.5e6, "{got}");
}

#[test]
fn fine_steps_leave_the_gain_in_charge() {
    let a = min_resolvable_separation(&SeparationSearch::new(LinkConfig::default(), 5e6), &wide_grid()).unwrap();
    let b = min_resolvable_separation(&SeparationSearch::new(LinkConfig::default(), 2.5e6), &wide_grid()).unwrap();
    assert!((a - b).abs() <= 2.5e6 + 1.0, "{a} vs {b}");
    assert!(a > 2.0 * 5e6, "{a}");
}

#[test]
fn wide_steps_cannot_resolve_inside_the_grid() {
    let got = min_resolvable_separation(&SeparationSearch::new(LinkConfig::default(), 100e6), &SeparationSearch::default_grid());
    assert!(matches!(got, Err(Error::NoneResolved)), "{got:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn argmax_ignores_sut_scale(scale in 0.01f64..100.0) {
        let cfg = LinkConfig::default();
        let period = 0.5e-6;
        let spec = lfm(0.3e9, 0.9e9, period);
        let base = synthesize(&spec, FS, 1).unwrap();
        let a = td_run(&base, period, 0.25e9, 25e6, 29, period, &cfg).tf;
        let b = td_run(&base.scaled(scale), period, 0.25e9, 25e6, 29, period, &cfg).tf;
        for c in 0..a.n_time() {
            prop_assert_eq!(argmax(&a.column(c)), argmax(&b.column(c)));
        }
    }
}
