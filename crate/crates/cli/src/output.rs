//! File emission: atomic writes, spectra CSV, analysis JSON and the run
//! manifest. Output is byte-deterministic: fixed-format floats in CSV,
//! shortest round-trip floats in JSON, and stable key order.

use std::path::{Path, PathBuf};

use serde::Serialize;

use polariton_core::engines::GreenResult;
use polariton_core::spectra::{spectrum_csv, PeakTable, Spectrum, SumRule};

use crate::config::RunConfig;
use crate::CliError;

/// Write via a temp file and rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::io(format!("writing {}: {e}", path.display()));
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::io(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, &text)
}

pub fn spectrum_file(dir: &Path, engine_label: &str, suffix: &str) -> PathBuf {
    dir.join(format!("spectrum_{engine_label}{suffix}.csv"))
}

pub fn write_spectrum(
    dir: &Path,
    suffix: &str,
    green: &GreenResult,
    spectrum: &Spectrum,
) -> Result<PathBuf, CliError> {
    let path = spectrum_file(dir, &green.engine.label(), suffix);
    write_atomic(&path, &spectrum_csv(green, spectrum))?;
    Ok(path)
}

#[derive(Serialize)]
pub struct ModesRecord {
    pub order: usize,
    /// `[re, im]` pairs; the linewidth is `−2·im`.
    pub eigenvalues: Vec<[f64; 2]>,
}

#[derive(Serialize)]
pub struct SumRuleRecord {
    pub engine: String,
    pub value: f64,
    pub tail: f64,
    pub grid_too_narrow: bool,
}

impl SumRuleRecord {
    pub fn new(engine: String, rule: SumRule) -> Self {
        Self {
            engine,
            value: rule.value,
            tail: rule.tail,
            grid_too_narrow: rule.grid_too_narrow,
        }
    }
}

/// Everything needed to reproduce a run byte-for-byte, plus bookkeeping.
#[derive(Serialize)]
pub struct Manifest<'a> {
    pub config: &'a RunConfig,
    pub spec_hashes: Vec<SpecHash>,
    pub version: &'static str,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
pub struct SpecHash {
    pub label: String,
    pub hash: String,
}

pub fn write_peaks(dir: &Path, suffix: &str, tables: &[PeakTable]) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("peaks{suffix}.json"));
    write_json(&path, &tables)?;
    Ok(path)
}

pub fn write_modes(dir: &Path, suffix: &str, modes: &[ModesRecord]) -> Result<PathBuf, CliError> {
    let path = dir.join(format!("modes{suffix}.json"));
    write_json(&path, &modes)?;
    Ok(path)
}
