//! Run configuration: JSON schema, CLI-flag overrides, preset resolution and
//! engine-selection parsing.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use polariton_core::engines::Engine;
use polariton_core::model::EnsembleSpec;
use polariton_core::presets;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn samples(&self) -> Vec<f64> {
        polariton_core::linspace(self.min, self.max, self.points)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisToggles {
    pub peaks: bool,
    pub modes: bool,
    pub sum_rule: bool,
    pub chi: bool,
    pub dyson: bool,
}

impl Default for AnalysisToggles {
    fn default() -> Self {
        Self {
            peaks: true,
            modes: true,
            sum_rule: false,
            chi: false,
            dyson: false,
        }
    }
}

/// One batch run: where the ensemble comes from, which engines to evaluate on
/// which grid, what to analyse, and where the files go.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub engines: Vec<String>,
    pub grid: GridSpec,
    #[serde(default)]
    pub analyses: AnalysisToggles,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_n: Option<Vec<usize>>,
    #[serde(default = "default_dyson_order")]
    pub dyson_m_max: usize,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_dyson_order() -> usize {
    4
}

/// Maximum Dyson order the batch front end accepts; the walk count grows
/// Catalan-like beyond desk scale.
pub const DYSON_ORDER_CAP: usize = 8;

/// Engine selection tokens: `dense`, `cf_full`, `trunc:K`, `d0`, `d1`,
/// `d0+d1`, `d2_x2`, `dyson:M`.
pub fn parse_engine(token: &str) -> Result<Engine, CliError> {
    let token = token.trim();
    if let Some(k) = token.strip_prefix("trunc:") {
        let k = k
            .parse()
            .map_err(|_| CliError::config(format!("bad truncation depth in `{token}`")))?;
        return Ok(Engine::Truncated(k));
    }
    if let Some(m) = token.strip_prefix("dyson:") {
        let m: usize = m
            .parse()
            .map_err(|_| CliError::config(format!("bad Dyson order in `{token}`")))?;
        if m > DYSON_ORDER_CAP {
            return Err(CliError::config(format!(
                "Dyson order {m} exceeds the cap {DYSON_ORDER_CAP}"
            )));
        }
        return Ok(Engine::Dyson(m));
    }
    match token {
        "dense" => Ok(Engine::Dense),
        "cf_full" => Ok(Engine::ContinuedFraction),
        "d0" => Ok(Engine::ExpansionTerm(0)),
        "d1" => Ok(Engine::ExpansionTerm(1)),
        "d2_x2" => Ok(Engine::ExpansionTerm(2)),
        "d0+d1" => Ok(Engine::ExpansionSum(1)),
        other => Err(CliError::config(format!(
            "unknown engine `{other}` (expected dense, cf_full, trunc:K, d0, d1, d0+d1, d2_x2 or dyson:M)"
        ))),
    }
}

pub fn parse_grid(text: &str) -> Result<GridSpec, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::config(format!(
            "grid must be MIN:MAX:POINTS, got `{text}`"
        )));
    }
    let min: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::config(format!("bad grid minimum `{}`", parts[0])))?;
    let max: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::config(format!("bad grid maximum `{}`", parts[1])))?;
    let points: usize = parts[2]
        .parse()
        .map_err(|_| CliError::config(format!("bad grid point count `{}`", parts[2])))?;
    Ok(GridSpec { min, max, points })
}

pub fn parse_sweep(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| CliError::config(format!("bad molecule count `{t}` in sweep list")))
        })
        .collect()
}

/// Preset names shipped with the tool.
pub const PRESET_NAMES: [&str; 2] = ["fig2a", "fig2b"];

pub struct PresetInfo {
    pub name: &'static str,
    pub spec: EnsembleSpec,
    pub engines: Vec<String>,
    pub grid: GridSpec,
    pub sweep_n: Option<Vec<usize>>,
}

fn preset_info(name: &str) -> Result<PresetInfo, CliError> {
    match name {
        "fig2a" => {
            let (min, max, points) = presets::fig2a_grid();
            Ok(PresetInfo {
                name: "fig2a",
                spec: presets::fig2a(presets::FIG2A_N_VALUES[0]),
                engines: vec!["d0".into(), "d0+d1".into(), "cf_full".into()],
                grid: GridSpec { min, max, points },
                sweep_n: Some(presets::FIG2A_N_VALUES.to_vec()),
            })
        }
        "fig2b" => {
            let (min, max, points) = presets::fig2b_grid();
            Ok(PresetInfo {
                name: "fig2b",
                spec: presets::fig2b(presets::FIG2B_COUNTS.0, presets::FIG2B_COUNTS.1),
                engines: vec!["trunc:0".into(), "trunc:1".into(), "trunc:2".into()],
                grid: GridSpec { min, max, points },
                sweep_n: None,
            })
        }
        other => Err(CliError::config(format!(
            "unknown preset `{other}`; available presets: {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// Build the fully resolved configuration for a preset name.
pub fn run_preset(name: &str) -> Result<RunConfig, CliError> {
    let info = preset_info(name)?;
    Ok(RunConfig {
        ensemble: Some(info.spec),
        ensemble_path: None,
        preset: Some(info.name.to_string()),
        engines: info.engines,
        grid: info.grid,
        analyses: AnalysisToggles::default(),
        out_dir: default_out_dir(),
        sweep_n: info.sweep_n,
        dyson_m_max: default_dyson_order(),
    })
}

/// Rebuild a preset ensemble for a swept molecule count.
pub fn preset_spec_for_count(name: &str, n: usize) -> Result<EnsembleSpec, CliError> {
    match name {
        "fig2a" => Ok(presets::fig2a(n)),
        "fig2b" => {
            let half = n / 2;
            if half == 0 || n % 2 != 0 {
                return Err(CliError::config(format!(
                    "fig2b sweeps need an even molecule count, got {n}"
                )));
            }
            Ok(presets::fig2b(half, half))
        }
        other => Err(CliError::config(format!("unknown preset `{other}`"))),
    }
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub preset: Option<String>,
    pub grid: Option<String>,
    pub engines: Option<String>,
    pub out: Option<PathBuf>,
    pub sweep_n: Option<String>,
}

fn read_json(path: &Path) -> Result<serde_json::Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{} is not valid JSON: {e}", path.display())))
}

fn config_from_value(value: serde_json::Value, origin: &Path) -> Result<RunConfig, CliError> {
    // a run manifest embeds the resolved config under "config"
    let value = match value {
        serde_json::Value::Object(mut map) if map.contains_key("config") => {
            map.remove("config").unwrap()
        }
        other => other,
    };
    let text = value.to_string();
    let mut track = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut track).map_err(|e| {
        CliError::config(format!(
            "{}: invalid configuration at /{}: {}",
            origin.display(),
            e.path().to_string().replace('.', "/").replace(['[', ']'], "/"),
            e.inner()
        ))
    })
}

/// Load, merge and validate a run configuration: file (or preset skeleton),
/// then flag overrides, then the preset resolution and ensemble loading.
pub fn resolve(overrides: &Overrides) -> Result<RunConfig, CliError> {
    let from_file = overrides.config.is_some();
    let mut config = match (&overrides.config, &overrides.preset) {
        (Some(path), _) => config_from_value(read_json(path)?, path)?,
        (None, Some(name)) => run_preset(name)?,
        (None, None) => {
            return Err(CliError::config(
                "either --config or --preset is required".into(),
            ))
        }
    };
    if let Some(name) = &overrides.preset {
        config.preset = Some(name.clone());
    }
    if let Some(grid) = &overrides.grid {
        config.grid = parse_grid(grid)?;
    }
    if let Some(engines) = &overrides.engines {
        config.engines = engines.split(',').map(|s| s.trim().to_string()).collect();
    }
    if let Some(out) = &overrides.out {
        config.out_dir = out.clone();
    }
    if let Some(sweep) = &overrides.sweep_n {
        config.sweep_n = Some(parse_sweep(sweep)?);
    }

    // preset overrides an inline spec when both are present
    if let Some(name) = config.preset.clone() {
        if from_file && (config.ensemble.is_some() || config.ensemble_path.is_some()) {
            eprintln!("note: preset `{name}` overrides the configured ensemble");
        }
        let info = preset_info(&name)?;
        config.ensemble = Some(info.spec);
        config.ensemble_path = None;
    } else if config.ensemble.is_none() {
        let path = config.ensemble_path.clone().ok_or_else(|| {
            CliError::config("configuration needs an ensemble, an ensemble_path or a preset".into())
        })?;
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        let spec = EnsembleSpec::from_json(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        config.ensemble = Some(spec);
        config.ensemble_path = None;
    }

    if config.engines.is_empty() {
        return Err(CliError::config("engine list must not be empty".into()));
    }
    for token in &config.engines {
        parse_engine(token)?;
    }
    if config.grid.points < 2 {
        return Err(CliError::config(format!(
            "grid needs at least 2 points, got {}",
            config.grid.points
        )));
    }
    if !(config.grid.min < config.grid.max) {
        return Err(CliError::config(format!(
            "grid minimum {} must lie below maximum {}",
            config.grid.min, config.grid.max
        )));
    }
    if config.dyson_m_max > DYSON_ORDER_CAP {
        return Err(CliError::config(format!(
            "dyson_m_max {} exceeds the cap {DYSON_ORDER_CAP}",
            config.dyson_m_max
        )));
    }
    config
        .ensemble
        .as_ref()
        .expect("resolved above")
        .validate()
        .map_err(|e| CliError::config(e.to_string()))?;
    Ok(config)
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.min, self.max, self.points)
    }
}
