//! A directory of scenario files, run concurrently.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::artifacts::{to_json, write_all, write_text};
use crate::config::ScenarioConfig;
use crate::error::{CliError, CliResult};
use crate::runner::{run_scenario, AssertionOutcome, Metadata};

pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    AssertionFailed,
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metrics {
    pub ridge_coverage: f64,
    pub truth_coverage_one_bin: Option<f64>,
    pub truth_rms_error_hz: Option<f64>,
    pub ridge_vs_oracle_median_hz: Option<f64>,
    pub pulse_fwhm_s: Option<f64>,
}

impl Metrics {
    fn from_metadata(m: &Metadata) -> Self {
        Self {
            ridge_coverage: m.ridge_coverage,
            truth_coverage_one_bin: m.truth_one_bin.map(|t| t.coverage),
            truth_rms_error_hz: m.truth_one_bin.map(|t| t.rms_error_hz),
            ridge_vs_oracle_median_hz: m.oracle.as_ref().and_then(|o| o.ridge_vs_oracle).map(|r| r.median_abs_err_hz),
            pulse_fwhm_s: m.pulse_fwhm_s,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub file: String,
    pub status: Status,
    pub category: Option<String>,
    pub message: Option<String>,
    pub exit_code: i32,
    pub metrics: Option<Metrics>,
    pub assertions: Vec<AssertionOutcome>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub n_scenarios: usize,
    pub n_passed: usize,
    pub scenarios: Vec<ScenarioReport>,
}

impl SuiteReport {
    /// Worst outcome over all scenarios: 2 beats 3 beats 4 beats 0.
    pub fn exit_code(&self) -> i32 {
        let codes: Vec<i32> = self.scenarios.iter().map(|s| s.exit_code).collect();
        [2, 3, 4].into_iter().find(|c| codes.contains(c)).unwrap_or(0)
    }
}

pub fn scenario_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "toml") && path.is_file() {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(CliError::Config(format!("{} holds no .toml scenario files", dir.display())));
    }
    files.sort();
    Ok(files)
}

fn error_report(name: String, file: String, e: &CliError) -> ScenarioReport {
    ScenarioReport {
        name,
        file,
        status: Status::Error,
        category: Some(e.category().into()),
        message: Some(e.to_string()),
        exit_code: e.exit_code(),
        metrics: None,
        assertions: Vec::new(),
    }
}

fn run_one(path: &Path, loaded: &CliResult<ScenarioConfig>, cli_seed: Option<u64>, out: &Path) -> ScenarioReport {
    let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let cfg = match loaded {
        Ok(c) => c,
        Err(e) => {
            let stem = path.file_stem().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
            return error_report(stem, file, e);
        }
    };
    let result = match run_scenario(cfg, cli_seed) {
        Ok(r) => r,
        Err(e) => return error_report(cfg.name.clone(), file, &e),
    };
    if let Err(e) = write_all(&out.join(&cfg.name), &cfg.outputs, &result) {
        return error_report(cfg.name.clone(), file, &e);
    }
    let passed = result.passed();
    ScenarioReport {
        name: cfg.name.clone(),
        file,
        status: if passed { Status::Pass } else { Status::AssertionFailed },
        category: (!passed).then(|| "AssertionFailed".into()),
        message: (!passed).then(|| result.failures().join("; ")),
        exit_code: if passed { 0 } else { 4 },
        metrics: Some(Metrics::from_metadata(&result.metadata)),
        assertions: result.metadata.assertions,
    }
}

/// Run every `*.toml` in `dir`, write each scenario's artifacts to
/// `out/<name>/` and the combined report to `out/report.json`.
pub fn run_suite(dir: &Path, cli_seed: Option<u64>, out: &Path) -> CliResult<SuiteReport> {
    let files = scenario_files(dir)?;
    let loaded: Vec<CliResult<ScenarioConfig>> = files.iter().map(|p| ScenarioConfig::load(p)).collect();
    let mut seen: Vec<(&str, &Path)> = loaded.iter().zip(&files).filter_map(|(c, p)| c.as_ref().ok().map(|c| (c.name.as_str(), p.as_path()))).collect();
    seen.sort();
    for w in seen.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(CliError::Config(format!(
                "scenario name {:?} is used by both {} and {}",
                w[0].0,
                w[0].1.display(),
                w[1].1.display()
            )));
        }
    }
    let mut scenarios: Vec<ScenarioReport> =
        files.par_iter().zip(&loaded).map(|(p, c)| run_one(p, c, cli_seed, out)).collect();
    scenarios.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.file.cmp(&b.file)));
    let report = SuiteReport {
        n_scenarios: scenarios.len(),
        n_passed: scenarios.iter().filter(|s| s.status == Status::Pass).count(),
        scenarios,
    };
    write_text(&out.join(REPORT_FILE), &to_json(&report))?;
    Ok(report)
}
