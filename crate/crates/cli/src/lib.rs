//! Configuration-driven runner for the `sbs-tfa` simulator.
//!
//! Each scenario is a TOML file (see [`config`]) naming a signal, a link and
//! its plan, the artifacts to write and any assertions to check.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod runner;
pub mod suite;

use std::path::{Path, PathBuf};

use sbs_tfa::{compare_ridges, ridge, RidgeStats, Spectrogram};
use serde::Serialize;

pub use config::{Assertion, LinkKind, Outputs, ScenarioConfig};
pub use error::{CliError, CliResult};
pub use runner::{run_scenario, Metadata, ScenarioResult};
pub use suite::{run_suite, SuiteReport};

/// Run one scenario file and write its artifacts into `out`. Artifacts are
/// written even when assertions fail; the failure is then returned.
pub fn simulate(config: &Path, seed: Option<u64>, out: &Path) -> CliResult<(ScenarioResult, Vec<PathBuf>)> {
    let cfg = ScenarioConfig::load(config)?;
    let result = run_scenario(&cfg, seed)?;
    let written = artifacts::write_all(out, &cfg.outputs, &result)?;
    let failures = result.failures();
    if !failures.is_empty() {
        return Err(CliError::Assertions(failures));
    }
    Ok((result, written))
}

pub const ORACLE_CSV: &str = "stft.csv";
pub const ORACLE_PNG: &str = "stft.png";
pub const ORACLE_RIDGE_CSV: &str = "stft_ridge.csv";

/// STFT of the scenario's SUT only, with its `[oracle]` parameters or the
/// defaults.
pub fn oracle(config: &Path, out: &Path) -> CliResult<(Spectrogram, Vec<PathBuf>)> {
    let cfg = ScenarioConfig::load(config)?;
    let params = cfg.oracle.unwrap_or_default();
    let periods = match (cfg.link, &cfg.sfcw_plan) {
        (LinkKind::TimeDivision, Some(p)) => {
            let m = p.step_period_s / cfg.signal.period_s();
            (m.round() as usize).max(1)
        }
        _ => cfg.n_periods,
    };
    let spec = runner::oracle_spectrogram(&cfg, &params, periods)?;
    let r = ridge(&spec, cfg.ridge_floor);
    let paths = [out.join(ORACLE_CSV), out.join(ORACLE_PNG), out.join(ORACLE_RIDGE_CSV)];
    artifacts::write_text(&paths[0], &spec.to_csv())?;
    artifacts::write_heatmap(&paths[1], &spec)?;
    artifacts::write_text(&paths[2], &artifacts::ridge_csv(&r))?;
    Ok((spec, paths.to_vec()))
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub ridge_floor: f64,
    pub ridge: RidgeStats,
    /// L-infinity distance over rows present in both, if any.
    pub linf: Option<f64>,
}

pub fn load_spectrogram(path: &Path) -> CliResult<Spectrogram> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Spectrogram::from_csv(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Ridge statistics of spectrogram `b` against spectrogram `a`.
pub fn compare(a: &Path, b: &Path, floor: f64) -> CliResult<Comparison> {
    let sa = load_spectrogram(a)?;
    let sb = load_spectrogram(b)?;
    let stats = compare_ridges(&ridge(&sa, floor), &ridge(&sb, floor))?;
    Ok(Comparison { ridge_floor: floor, ridge: stats, linf: sa.linf_distance(&sb).ok() })
}
