//! Scenario files (TOML).
//!
//! ```toml
//! name = "lfm_25mhz"
//! link = "time_division"
//! reference_freq_hz = 100e6
//!
//! [signal]
//! kind = "lfm"
//! f_start_hz = 0.1e9
//! f_end_hz = 4e9
//! period_s = 2e-6
//!
//! [sfcw_plan]
//! f_step1_hz = 50e6
//! delta_step_hz = 25e6
//! step_period_s = 2e-6
//! n_steps = 157
//!
//! [[assertions]]
//! kind = "ridge_truth"
//! tolerance_hz = 25e6
//! min_coverage = 0.95
//! ```

use std::path::Path;

use sbs_tfa::reconstruction::{DEFAULT_MIN_HEIGHT_RATIO, DEFAULT_MIN_WIDTH_RATIO};
use sbs_tfa::{BranchPlan, LinkConfig, SfcwPlan, SignalSpec, StftParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    TimeDivision,
    Parallel,
}

/// Artifact file names, relative to the output directory. Missing entries
/// are not written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub spectrogram_csv: Option<String>,
    #[serde(default)]
    pub heatmap_image: Option<String>,
    #[serde(default)]
    pub metadata: Option<String>,
    #[serde(default)]
    pub ridge_csv: Option<String>,
    /// STFT spectrogram; needs an `[oracle]` section.
    #[serde(default)]
    pub oracle_csv: Option<String>,
    #[serde(default)]
    pub oracle_heatmap: Option<String>,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            spectrogram_csv: Some("spectrogram.csv".into()),
            heatmap_image: Some("heatmap.png".into()),
            metadata: Some("metadata.json".into()),
            ridge_csv: Some("ridge.csv".into()),
            oracle_csv: None,
            oracle_heatmap: None,
        }
    }
}

impl Outputs {
    pub fn entries(&self) -> impl Iterator<Item = (&'static str, &str)> {
        [
            ("spectrogram_csv", &self.spectrogram_csv),
            ("heatmap_image", &self.heatmap_image),
            ("metadata", &self.metadata),
            ("ridge_csv", &self.ridge_csv),
            ("oracle_csv", &self.oracle_csv),
            ("oracle_heatmap", &self.oracle_heatmap),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
    }
}

/// A check evaluated after the run; any failure gives exit status 4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Assertion {
    /// Fraction of columns whose ridge lies within `tolerance_hz` of the
    /// analytic instantaneous frequency. With `present_only`, columns where
    /// the ridge is absent are left out of the fraction.
    RidgeTruth {
        tolerance_hz: f64,
        min_coverage: f64,
        #[serde(default)]
        present_only: bool,
    },
    /// RMS ridge error over columns where some row lies within
    /// `tolerance_hz` of the truth.
    RidgeRms { tolerance_hz: f64, max_rms_hz: f64 },
    /// Median ridge distance to the STFT ridge.
    RidgeVsOracle {
        max_median_err_hz: f64,
        #[serde(default)]
        min_coverage: f64,
    },
    Resolvability { f_a_hz: f64, f_b_hz: f64, resolved: bool },
    PulseFwhm {
        #[serde(default)]
        min_s: Option<f64>,
        #[serde(default)]
        max_s: Option<f64>,
    },
}

fn default_rate() -> f64 {
    10e9
}

fn one() -> usize {
    1
}

fn default_floor() -> f64 {
    0.02
}

fn default_height() -> f64 {
    DEFAULT_MIN_HEIGHT_RATIO
}

fn default_width() -> f64 {
    DEFAULT_MIN_WIDTH_RATIO
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Overrides `link_config.rng_seed`; `--seed` overrides both.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    /// SUT periods fed to the parallel link and the STFT oracle. The
    /// time-division link always uses one period per step multiple.
    #[serde(default = "one")]
    pub n_periods: usize,
    /// Time-division reference tone; defaults to the first measured frequency.
    #[serde(default)]
    pub reference_freq_hz: Option<f64>,
    pub signal: SignalSpec,
    pub link: LinkKind,
    #[serde(default)]
    pub link_config: LinkConfig,
    #[serde(default)]
    pub sfcw_plan: Option<SfcwPlan>,
    #[serde(default)]
    pub branch_plan: Option<BranchPlan>,
    #[serde(default = "default_floor")]
    pub ridge_floor: f64,
    #[serde(default = "default_height")]
    pub min_height_ratio: f64,
    #[serde(default = "default_width")]
    pub min_width_ratio: f64,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub oracle: Option<StftParams>,
    #[serde(default)]
    pub assertions: Vec<Assertion>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Structural checks. Period compatibility is checked when the run
    /// starts, since it is a plan error rather than a malformed file.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            return bad(format!("scenario name {:?} must be a plain non-empty file name", self.name));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return bad(format!("sample_rate_hz must be positive, got {}", self.sample_rate_hz));
        }
        if self.n_periods == 0 {
            return bad("n_periods must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.ridge_floor) {
            return bad(format!("ridge_floor must be in [0, 1), got {}", self.ridge_floor));
        }
        let cfg_err = |e: sbs_tfa::Error| CliError::Config(e.to_string());
        self.signal.validate().map_err(cfg_err)?;
        self.link_config.validate().map_err(cfg_err)?;
        match (self.link, &self.sfcw_plan, &self.branch_plan) {
            (LinkKind::TimeDivision, Some(p), None) => p.check_shape().map_err(cfg_err)?,
            (LinkKind::Parallel, None, Some(p)) => p.validate().map_err(cfg_err)?,
            (LinkKind::TimeDivision, _, _) => {
                return bad("link = \"time_division\" needs exactly one [sfcw_plan] and no [branch_plan]".into())
            }
            (LinkKind::Parallel, _, _) => {
                return bad("link = \"parallel\" needs exactly one [branch_plan] and no [sfcw_plan]".into())
            }
        }
        if self.link == LinkKind::Parallel && self.reference_freq_hz.is_some() {
            return bad("reference_freq_hz only applies to the time-division link".into());
        }
        if self.outputs.entries().next().is_none() {
            return bad("[outputs] lists no artifacts".into());
        }
        for (key, path) in self.outputs.entries() {
            if path.trim().is_empty() {
                return bad(format!("outputs.{key} is empty"));
            }
            if key.starts_with("oracle") && self.oracle.is_none() {
                return bad(format!("outputs.{key} needs an [oracle] section"));
            }
        }
        if let Some(p) = &self.oracle {
            p.validate().map_err(cfg_err)?;
        }
        for a in &self.assertions {
            if matches!(a, Assertion::RidgeVsOracle { .. }) && self.oracle.is_none() {
                return bad("ridge_vs_oracle assertion needs an [oracle] section".into());
            }
        }
        Ok(())
    }

    pub fn effective_seed(&self, cli_seed: Option<u64>) -> u64 {
        cli_seed.or(self.seed).unwrap_or(self.link_config.rng_seed)
    }
}
