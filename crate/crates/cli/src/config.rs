//! Run configuration: one TOML file whose sections mirror the pipeline
//! stages, plus dotted `key=value` overrides from the command line.

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt;
use std::path::{Path, PathBuf};

use cla_core::correction::{CorrectionConfig, UnitRanking};
use cla_core::evalkit::{Interpolation, PplConfig};
use cla_core::gymkit::{PlantSpec, ToyDatasetSpec, TrainConfig};
use cla_core::ProbeConfig;

/// A configuration problem, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Detect,
    Correct,
    Train,
    Sweep,
    Geometry,
    Eval,
    Plant,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Detect => "detect",
            CommandKind::Correct => "correct",
            CommandKind::Train => "train",
            CommandKind::Sweep => "sweep",
            CommandKind::Geometry => "geometry",
            CommandKind::Eval => "eval",
            CommandKind::Plant => "plant",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelPaths {
    pub generator: Option<PathBuf>,
    pub discriminator: Option<PathBuf>,
    /// Artifact-free generator used as ground truth and as the real set.
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    pub search_bound: f64,
    pub grid_divisions: usize,
    pub zero_tol: f64,
    pub layer: usize,
}

impl Default for ProbeSection {
    fn default() -> Self {
        let p = ProbeConfig::default();
        Self {
            search_bound: p.search_bound,
            grid_divisions: p.grid_divisions,
            zero_tol: p.zero_tol,
            layer: 4,
        }
    }
}

impl ProbeSection {
    pub fn probe_config(&self) -> ProbeConfig {
        ProbeConfig {
            search_bound: self.search_bound,
            grid_divisions: self.grid_divisions,
            zero_tol: self.zero_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringSection {
    pub codes: usize,
    pub fraction: f64,
    /// Resample latent components beyond this magnitude.
    pub truncation: Option<f64>,
}

impl Default for ScoringSection {
    fn default() -> Self {
        Self {
            codes: 1000,
            fraction: 0.1,
            truncation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrectionSection {
    pub stopping_layer: usize,
    pub num_units: usize,
    pub maintain_ratio: f64,
    pub ranking: UnitRanking,
}

impl Default for CorrectionSection {
    fn default() -> Self {
        Self {
            stopping_layer: 4,
            num_units: 1,
            maintain_ratio: 0.9,
            ranking: UnitRanking::Magnitude,
        }
    }
}

impl CorrectionSection {
    pub fn correction_config(&self) -> CorrectionConfig {
        CorrectionConfig {
            stopping_layer: self.stopping_layer,
            num_units: self.num_units,
            maintain_ratio: self.maintain_ratio,
            ranking: self.ranking,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub k: usize,
    pub epsilon: f64,
    pub pairs: usize,
    pub interpolation: Interpolation,
    /// Generated samples compared against the real set.
    pub samples: usize,
    /// CSV of real samples (header `x0, x1, ...`); overrides the reference model.
    pub reference_samples: Option<PathBuf>,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            k: 3,
            epsilon: 1e-4,
            pairs: 1024,
            interpolation: Interpolation::Lerp,
            samples: 500,
            reference_samples: None,
        }
    }
}

impl EvalSection {
    pub fn ppl_config(&self) -> PplConfig {
        PplConfig {
            epsilon: self.epsilon,
            pairs: self.pairs,
            interpolation: self.interpolation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub dataset: ToyDatasetSpec,
    pub model: TrainConfig,
    /// Generator layer whose neurons are tracked across snapshots.
    pub dynamics_layer: usize,
    /// Fixed latent code for the dynamics series; zeros when absent.
    pub z_fixed: Option<Vec<f64>>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            dataset: ToyDatasetSpec::default(),
            model: TrainConfig::default(),
            dynamics_layer: 2,
            z_fixed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub search_bounds: Vec<f64>,
    pub grid_divisions: Vec<usize>,
    pub layers: Vec<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            search_bounds: vec![5.0, 10.0, 30.0],
            grid_divisions: vec![20],
            layers: vec![4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub codes: usize,
    pub layer: usize,
    pub learning_rate: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self {
            codes: 32,
            layer: 2,
            learning_rate: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<CommandKind>,
    pub seed: u64,
    /// Output directory; not part of the config hash.
    pub out: Option<PathBuf>,
    pub model: ModelPaths,
    pub probe: ProbeSection,
    pub scoring: ScoringSection,
    pub correction: CorrectionSection,
    pub eval: EvalSection,
    pub train: TrainSection,
    pub sweep: SweepSection,
    pub geometry: GeometrySection,
    pub plant: PlantSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: 0,
            out: None,
            model: ModelPaths::default(),
            probe: ProbeSection::default(),
            scoring: ScoringSection::default(),
            correction: CorrectionSection::default(),
            eval: EvalSection::default(),
            train: TrainSection::default(),
            sweep: SweepSection::default(),
            geometry: GeometrySection::default(),
            plant: PlantSpec::default(),
        }
    }
}

/// Parses `value` as a TOML literal, falling back to a bare string.
fn parse_literal(value: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()))
}

fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| config_error(format!("override `{assignment}` is not key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut table = root;
    for p in parents {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| config_error(format!("override `{key}`: `{p}` is not a table")))?;
    }
    table.insert(last.to_string(), parse_literal(value.trim()));
    Ok(())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_error(format!("invalid config: {e}")))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    /// Reads `path` (or starts from defaults) and applies dotted overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_error(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| config_error(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let text = toml::to_string(&table).context("re-serializing config")?;
        Self::from_toml_str(&text)
    }

    /// SHA-256 of the canonical TOML form with the output directory removed.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        hex::encode(Sha256::digest(c.to_toml_string().as_bytes()))
    }

    pub fn command(&self) -> Result<CommandKind> {
        self.command
            .ok_or_else(|| config_error("no command given"))
    }

    pub fn out_dir(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| config_error("no output directory given (--out)"))
    }

    fn require_file(&self, what: &str, path: &Option<PathBuf>) -> Result<PathBuf> {
        let p = path
            .as_ref()
            .ok_or_else(|| config_error(format!("{what} path is required")))?;
        if !p.is_file() {
            return Err(config_error(format!("{what} {} does not exist", p.display())));
        }
        Ok(p.clone())
    }

    pub fn generator_path(&self) -> Result<PathBuf> {
        self.require_file("generator model", &self.model.generator)
    }

    pub fn discriminator_path(&self) -> Result<PathBuf> {
        self.require_file("discriminator model", &self.model.discriminator)
    }

    /// Reference model path if one is configured; errors if it is missing on disk.
    pub fn reference_path(&self) -> Result<Option<PathBuf>> {
        match &self.model.reference {
            None => Ok(None),
            some => self.require_file("reference model", some).map(Some),
        }
    }

    /// Checks everything that can be checked without loading models.
    pub fn validate(&self) -> Result<()> {
        let cmd = self.command()?;
        self.out_dir()?;
        let core = |r: cla_core::Result<()>| r.map_err(|e| config_error(e.to_string()));
        match cmd {
            CommandKind::Detect | CommandKind::Correct | CommandKind::Sweep => {
                self.generator_path()?;
                self.reference_path()?;
                core(self.probe.probe_config().validate())?;
                if self.scoring.codes == 0 {
                    return Err(config_error("scoring.codes must be positive"));
                }
                if !(self.scoring.fraction > 0.0 && self.scoring.fraction <= 0.5) {
                    return Err(config_error(format!(
                        "scoring.fraction must lie in (0, 0.5], got {}",
                        self.scoring.fraction
                    )));
                }
                if let Some(t) = self.scoring.truncation {
                    if !(t > 0.0) {
                        return Err(config_error(format!("truncation must be positive, got {t}")));
                    }
                }
                if cmd == CommandKind::Sweep {
                    let s = &self.sweep;
                    if s.search_bounds.is_empty() || s.grid_divisions.is_empty() || s.layers.is_empty() {
                        return Err(config_error("sweep grid is empty"));
                    }
                    for &r in &s.search_bounds {
                        for &n in &s.grid_divisions {
                            let p = ProbeConfig { search_bound: r, grid_divisions: n, ..self.probe.probe_config() };
                            core(p.validate())?;
                        }
                    }
                    core(self.eval.ppl_config().validate())?;
                }
            }
            CommandKind::Train => {
                core(self.train.dataset.validate())?;
                core(self.train.model.validate())?;
                if self.train.model.data_dim != self.train.dataset.dim() {
                    return Err(config_error(format!(
                        "train.model.data_dim is {} but the dataset has dimension {}",
                        self.train.model.data_dim,
                        self.train.dataset.dim()
                    )));
                }
                core(self.probe.probe_config().validate())?;
            }
            CommandKind::Geometry => {
                self.generator_path()?;
                self.discriminator_path()?;
                if !(self.geometry.learning_rate > 0.0) {
                    return Err(config_error("geometry.learning_rate must be positive"));
                }
            }
            CommandKind::Eval => {
                self.generator_path()?;
                if self.eval.reference_samples.is_none() && self.reference_path()?.is_none() {
                    return Err(config_error(
                        "eval needs eval.reference_samples or model.reference",
                    ));
                }
                if let Some(p) = &self.eval.reference_samples {
                    if !p.is_file() {
                        return Err(config_error(format!("reference samples {} do not exist", p.display())));
                    }
                }
                core(self.eval.ppl_config().validate())?;
            }
            CommandKind::Plant => core(self.plant.validate())?,
        }
        Ok(())
    }
}
