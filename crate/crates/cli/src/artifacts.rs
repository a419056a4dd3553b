//! Artifact files: spectrogram CSV, grayscale PNG heatmap, ridge CSV and
//! metadata JSON.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use image::{GrayImage, ImageFormat};
use sbs_tfa::{Ridge, Spectrogram};
use serde::Serialize;

use crate::config::Outputs;
use crate::error::{CliError, CliResult};
use crate::runner::ScenarioResult;

pub fn ridge_csv(ridge: &Ridge) -> String {
    let mut out = String::from("time_s,freq_hz\n");
    for (t, f) in ridge.times_s.iter().zip(&ridge.freqs_hz) {
        match f {
            Some(f) => {
                let _ = writeln!(out, "{t},{f}");
            }
            None => {
                let _ = writeln!(out, "{t},");
            }
        }
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("metadata serializes");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Row 0 (lowest frequency) at the bottom of the image.
pub fn write_heatmap(path: &Path, spec: &Spectrogram) -> CliResult<()> {
    let (w, h, px) = spec.to_gray8();
    let img = GrayImage::from_raw(w, h, px)
        .ok_or_else(|| CliError::Image { path: path.into(), message: "pixel buffer does not match size".into() })?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| CliError::Image { path: path.into(), message: e.to_string() })
}

/// Write every artifact listed in `outputs` under `dir`.
pub fn write_all(dir: &Path, outputs: &Outputs, result: &ScenarioResult) -> CliResult<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (key, name) in outputs.entries() {
        let path = dir.join(name);
        match key {
            "spectrogram_csv" => write_text(&path, &result.spectrogram.to_csv())?,
            "heatmap_image" => write_heatmap(&path, &result.spectrogram)?,
            "metadata" => write_text(&path, &to_json(&result.metadata))?,
            "ridge_csv" => write_text(&path, &ridge_csv(&result.ridge))?,
            "oracle_csv" | "oracle_heatmap" => {
                let Some(s) = &result.oracle else { continue };
                if key == "oracle_csv" {
                    write_text(&path, &s.to_csv())?;
                } else {
                    write_heatmap(&path, s)?;
                }
            }
            _ => unreachable!("unknown output key {key}"),
        }
        written.push(path);
    }
    Ok(written)
}
