//! One scenario: simulate, reconstruct, compare, check assertions.

use sbs_tfa::parallel_link::branch_offsets;
use sbs_tfa::{
    compare_ridges, extract_frame, find_reference_pulse, measured_frequency, parallel_oversampling, pulse_fwhm_s,
    ridge, run_parallel_raw, run_time_division, segment_and_stack, stft, synthesize, truth_agreement,
    two_tone_resolvability, validate_plan, BranchPlan, LinkConfig, PulseDetection, Resolvability, Ridge, RidgeStats,
    SampledSignal, SfcwPlan, SignalSpec, Spectrogram, StftParams, TruthStats,
};
use serde::Serialize;

use crate::config::{Assertion, LinkKind, ScenarioConfig};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeDivisionInfo {
    pub plan: SfcwPlan,
    pub reference_freq_hz: f64,
    pub step_frequencies_hz: Vec<f64>,
    pub measured_frequencies_hz: Vec<f64>,
    pub min_height_ratio: f64,
    pub min_width_ratio: f64,
    pub reference_pulse: PulseDetection,
    pub reference_step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParallelInfo {
    pub plan: BranchPlan,
    pub branch_frequencies_hz: Vec<f64>,
    pub branch_offsets_hz: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleInfo {
    pub params: StftParams,
    pub n_periods: usize,
    pub ridge_vs_oracle: Option<RidgeStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssertionOutcome {
    pub assertion: Assertion,
    pub passed: bool,
    pub value: Option<f64>,
    pub detail: String,
}

/// Everything the run resolved, written as the metadata artifact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub name: String,
    pub version: &'static str,
    pub seed: u64,
    pub link: LinkKind,
    pub sample_rate_hz: f64,
    pub n_periods: usize,
    pub signal: SignalSpec,
    pub link_config: LinkConfig,
    pub gain_center_hz: f64,
    pub optical_oversampling: usize,
    pub output_decimation: usize,
    pub column_rate_hz: f64,
    pub time_division: Option<TimeDivisionInfo>,
    pub parallel: Option<ParallelInfo>,
    pub rows_hz: Vec<f64>,
    pub n_time: usize,
    /// FWHM of the main FTTM pulse. Time-division measures it at the full
    /// detector rate, parallel at the column rate.
    pub pulse_fwhm_s: Option<f64>,
    pub pulse_fwhm_rate_hz: f64,
    pub ridge_floor: f64,
    pub ridge_coverage: f64,
    /// Agreement with the analytic instantaneous frequency at a tolerance of
    /// one row spacing.
    pub truth_one_bin: Option<TruthStats>,
    pub oracle: Option<OracleInfo>,
    pub assertions: Vec<AssertionOutcome>,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub spectrogram: Spectrogram,
    pub ridge: Ridge,
    pub oracle: Option<Spectrogram>,
    pub metadata: Metadata,
}

impl ScenarioResult {
    pub fn failures(&self) -> Vec<String> {
        self.metadata
            .assertions
            .iter()
            .filter(|a| !a.passed)
            .map(|a| format!("{}: {}", self.metadata.name, a.detail))
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.metadata.assertions.iter().all(|a| a.passed)
    }
}

struct LinkRun {
    spectrogram: Spectrogram,
    oversampling: usize,
    pulse_fwhm_s: Option<f64>,
    pulse_rate_hz: f64,
    oracle_periods: usize,
    td: Option<TimeDivisionInfo>,
    par: Option<ParallelInfo>,
}

fn run_td(cfg: &ScenarioConfig, link: &LinkConfig) -> CliResult<LinkRun> {
    let fs = cfg.sample_rate_hz;
    let mut plan = cfg.sfcw_plan.clone().expect("validated");
    let given = plan.period_multiple_m.take();
    let m = validate_plan(&mut plan, cfg.signal.period_s())?;
    if given.is_some_and(|g| g != m) {
        return Err(CliError::Config(format!(
            "sfcw_plan.period_multiple_m = {} but the step holds {m} SUT periods",
            given.unwrap_or(0)
        )));
    }
    let f_ref = match cfg.reference_freq_hz {
        Some(f) => f,
        None => measured_frequency(&plan, 1, link)?,
    };
    let sut = synthesize(&cfg.signal, fs, 1)?;
    let trace = run_time_division(&sut, f_ref, &plan, link)?;
    let anchor = find_reference_pulse(&trace, cfg.min_height_ratio, cfg.min_width_ratio)?;
    let frame = extract_frame(&trace, &anchor)?;
    let spectrogram = segment_and_stack(&frame, link)?;
    let pulse = pulse_fwhm_s(&frame, link)?;
    let td = TimeDivisionInfo {
        step_frequencies_hz: (1..=plan.n_steps).map(|n| plan.step_frequency(n)).collect(),
        measured_frequencies_hz: trace.measured_freqs_hz.clone(),
        plan,
        reference_freq_hz: f_ref,
        min_height_ratio: cfg.min_height_ratio,
        min_width_ratio: cfg.min_width_ratio,
        reference_pulse: anchor,
        reference_step: trace.reference_step(),
    };
    Ok(LinkRun {
        spectrogram,
        oversampling: trace.optical_oversampling,
        pulse_fwhm_s: pulse,
        pulse_rate_hz: fs,
        oracle_periods: m,
        td: Some(td),
        par: None,
    })
}

/// Circular FWHM, in columns, of the main pulse in the row holding the most
/// energy.
fn row_pulse_width(spec: &Spectrogram) -> Option<usize> {
    let (_, row) = spec
        .rows()
        .map(|r| (r.iter().sum::<f64>(), r))
        .filter(|(e, _)| *e > 0.0)
        .max_by(|a, b| a.0.total_cmp(&b.0))?;
    let l = row.len();
    let (peak, &h) = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
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
    Some(width)
}

fn run_par(cfg: &ScenarioConfig, link: &LinkConfig) -> CliResult<LinkRun> {
    let fs = cfg.sample_rate_hz;
    let plan = cfg.branch_plan.clone().expect("validated");
    let sut = synthesize(&cfg.signal, fs, cfg.n_periods)?;
    let raw = run_parallel_raw(&sut, &plan, link)?;
    let col_rate = fs / link.output_decimation(fs) as f64;
    let pulse = row_pulse_width(&raw).map(|w| w as f64 / col_rate);
    let par = ParallelInfo { branch_frequencies_hz: plan.frequencies(), branch_offsets_hz: branch_offsets(&plan, link), plan };
    Ok(LinkRun {
        oversampling: parallel_oversampling(&sut, &par.plan, link)?,
        spectrogram: raw.normalized(),
        pulse_fwhm_s: pulse,
        pulse_rate_hz: col_rate,
        oracle_periods: cfg.n_periods,
        td: None,
        par: Some(par),
    })
}

fn row_spacing(spec: &Spectrogram) -> f64 {
    match spec.freq_axis_hz() {
        [a, b, ..] => b - a,
        _ => f64::INFINITY,
    }
}

fn check(a: &Assertion, ctx: &Context) -> AssertionOutcome {
    let outcome = |passed: bool, value: Option<f64>, detail: String| AssertionOutcome {
        assertion: a.clone(),
        passed,
        value,
        detail,
    };
    let fail = |e: sbs_tfa::Error| outcome(false, None, format!("{} could not be evaluated: {e}", kind(a)));
    match a {
        Assertion::RidgeTruth { tolerance_hz, min_coverage, present_only } => {
            match truth_agreement(ctx.ridge, ctx.signal, ctx.spec.freq_axis_hz(), *tolerance_hz) {
                Ok(st) => {
                    let present = ctx.ridge.coverage();
                    let cov = if *present_only {
                        if present > 0.0 { st.coverage / present } else { 0.0 }
                    } else {
                        st.coverage
                    };
                    outcome(
                        cov >= *min_coverage,
                        Some(cov),
                        format!("ridge within {} MHz for {cov:.4} of columns (>= {min_coverage})", tolerance_hz / 1e6),
                    )
                }
                Err(e) => fail(e),
            }
        }
        Assertion::RidgeRms { tolerance_hz, max_rms_hz } => {
            match truth_agreement(ctx.ridge, ctx.signal, ctx.spec.freq_axis_hz(), *tolerance_hz) {
                Ok(st) => outcome(
                    st.rms_error_hz <= *max_rms_hz,
                    Some(st.rms_error_hz),
                    format!("ridge RMS error {:.3} MHz (<= {} MHz)", st.rms_error_hz / 1e6, max_rms_hz / 1e6),
                ),
                Err(e) => fail(e),
            }
        }
        Assertion::RidgeVsOracle { max_median_err_hz, min_coverage } => match ctx.vs_oracle {
            Some(st) => outcome(
                st.median_abs_err_hz <= *max_median_err_hz && st.coverage_fraction >= *min_coverage,
                Some(st.median_abs_err_hz),
                format!(
                    "median distance to STFT ridge {:.3} MHz (<= {} MHz), coverage {:.4} (>= {min_coverage})",
                    st.median_abs_err_hz / 1e6,
                    max_median_err_hz / 1e6,
                    st.coverage_fraction
                ),
            ),
            None => outcome(false, None, "STFT ridge has no overlap with the link ridge".into()),
        },
        Assertion::Resolvability { f_a_hz, f_b_hz, resolved } => {
            match two_tone_resolvability(ctx.spec, *f_a_hz, *f_b_hz) {
                Ok(Resolvability { resolved: got, valley_ratio }) => outcome(
                    got == *resolved,
                    Some(valley_ratio),
                    format!(
                        "{} / {} MHz valley ratio {valley_ratio:.4}: resolved = {got} (expected {resolved})",
                        f_a_hz / 1e6,
                        f_b_hz / 1e6
                    ),
                ),
                Err(e) => fail(e),
            }
        }
        Assertion::PulseFwhm { min_s, max_s } => match ctx.pulse_fwhm_s {
            Some(w) => {
                let ok = min_s.is_none_or(|m| w >= m) && max_s.is_none_or(|m| w <= m);
                outcome(ok, Some(w), format!("pulse FWHM {:.2} ns", w * 1e9))
            }
            None => outcome(false, None, "no pulse found".into()),
        },
    }
}

fn kind(a: &Assertion) -> &'static str {
    match a {
        Assertion::RidgeTruth { .. } => "ridge_truth",
        Assertion::RidgeRms { .. } => "ridge_rms",
        Assertion::RidgeVsOracle { .. } => "ridge_vs_oracle",
        Assertion::Resolvability { .. } => "resolvability",
        Assertion::PulseFwhm { .. } => "pulse_fwhm",
    }
}

struct Context<'a> {
    spec: &'a Spectrogram,
    ridge: &'a Ridge,
    signal: &'a SignalSpec,
    vs_oracle: Option<RidgeStats>,
    pulse_fwhm_s: Option<f64>,
}

/// STFT of `n_periods` periods of the scenario's SUT.
pub fn oracle_spectrogram(cfg: &ScenarioConfig, params: &StftParams, n_periods: usize) -> CliResult<Spectrogram> {
    let sut: SampledSignal = synthesize(&cfg.signal, cfg.sample_rate_hz, n_periods)?;
    Ok(stft(&sut, params)?)
}

pub fn run_scenario(cfg: &ScenarioConfig, cli_seed: Option<u64>) -> CliResult<ScenarioResult> {
    cfg.validate()?;
    let seed = cfg.effective_seed(cli_seed);
    let link = LinkConfig { rng_seed: seed, ..cfg.link_config.clone() };
    let run = match cfg.link {
        LinkKind::TimeDivision => run_td(cfg, &link)?,
        LinkKind::Parallel => run_par(cfg, &link)?,
    };
    let spec = run.spectrogram;
    let r = ridge(&spec, cfg.ridge_floor);
    let (oracle, oracle_info) = match &cfg.oracle {
        Some(params) => {
            let s = oracle_spectrogram(cfg, params, run.oracle_periods)?;
            let vs = compare_ridges(&r, &ridge(&s, cfg.ridge_floor)).ok();
            (Some(s), Some(OracleInfo { params: *params, n_periods: run.oracle_periods, ridge_vs_oracle: vs }))
        }
        None => (None, None),
    };
    let ctx = Context {
        spec: &spec,
        ridge: &r,
        signal: &cfg.signal,
        vs_oracle: oracle_info.as_ref().and_then(|o| o.ridge_vs_oracle),
        pulse_fwhm_s: run.pulse_fwhm_s,
    };
    let assertions = cfg.assertions.iter().map(|a| check(a, &ctx)).collect();
    let fs = cfg.sample_rate_hz;
    let dec = link.output_decimation(fs);
    let metadata = Metadata {
        name: cfg.name.clone(),
        version: env!("CARGO_PKG_VERSION"),
        seed,
        link: cfg.link,
        sample_rate_hz: fs,
        n_periods: run.oracle_periods,
        signal: cfg.signal.clone(),
        gain_center_hz: link.gain_center_hz(),
        link_config: LinkConfig { optical_oversampling: Some(run.oversampling), ..link.resolved() },
        optical_oversampling: run.oversampling,
        output_decimation: dec,
        column_rate_hz: fs / dec as f64,
        time_division: run.td,
        parallel: run.par,
        rows_hz: spec.freq_axis_hz().to_vec(),
        n_time: spec.n_time(),
        pulse_fwhm_s: run.pulse_fwhm_s,
        pulse_fwhm_rate_hz: run.pulse_rate_hz,
        ridge_floor: cfg.ridge_floor,
        ridge_coverage: r.coverage(),
        truth_one_bin: truth_agreement(&r, &cfg.signal, spec.freq_axis_hz(), row_spacing(&spec)).ok(),
        oracle: oracle_info,
        assertions,
    };
    Ok(ScenarioResult { spectrogram: spec, ridge: r, oracle, metadata })
}
