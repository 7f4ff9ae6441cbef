//! Run configuration: a TOML file with `[data]`, `[model]`, `[train]` and
//! `[augment]` sections, overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use gaitnet::augment::MixupConfig;
use gaitnet::data::NUM_CLASSES;
use gaitnet::evaluate::TrainConfig;
use gaitnet::model::{Architecture, HeadVariant, ModelConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::Failure;

pub const ECHO_FILE: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Manifest of the motion dataset to read.
    pub manifest: Option<PathBuf>,
    /// Per-class sample counts produced by `synth`.
    pub counts: [usize; NUM_CLASSES],
    /// Generator seed used by `synth`.
    pub seed: u64,
    /// Raw frame count of generated motions.
    pub frames: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            manifest: None,
            counts: [10, 4, 18, 13],
            seed: 0,
            frames: 100,
        }
    }
}

/// Training options; mixup settings live in their own section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub k_folds: usize,
    pub checked: bool,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            epochs: t.epochs,
            lr: t.lr,
            batch_size: t.batch_size,
            seed: t.seed,
            k_folds: t.k_folds,
            checked: t.checked,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub augment: MixupConfig,
}

impl RunConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            lr: self.train.lr,
            batch_size: self.train.batch_size,
            seed: self.train.seed,
            k_folds: self.train.k_folds,
            mixup: self.augment.clone(),
            checked: self.train.checked,
        }
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.model.validate()?;
        self.train_config().validate()?;
        if self.data.frames < 2 {
            return Err(Failure::Config(format!("data.frames must be at least 2, got {}", self.data.frames)));
        }
        Ok(())
    }

    pub fn manifest(&self) -> Result<&Path, Failure> {
        self.data
            .manifest
            .as_deref()
            .ok_or_else(|| Failure::Config("no dataset given (use --data or data.manifest)".into()))
    }

    /// Writes the effective configuration into `dir`, creating it if needed.
    pub fn echo(&self, dir: &Path) -> Result<(), Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
        let text = toml::to_string_pretty(self).map_err(|e| Failure::Config(e.to_string()))?;
        let path = dir.join(ECHO_FILE);
        fs::write(&path, text).map_err(|e| Failure::io(&path, e))
    }
}

/// Ordered `section.key = value` overrides applied on top of the file.
#[derive(Debug, Default)]
pub struct Overrides(Vec<(String, Value)>);

impl Overrides {
    pub fn set(&mut self, key: &str, value: impl Into<Value>) {
        self.0.push((key.to_string(), value.into()));
    }

    pub fn set_opt<T: Into<Value>>(&mut self, key: &str, value: Option<T>) {
        if let Some(v) = value {
            self.set(key, v);
        }
    }

    /// Parses `section.key=value`; the value is read as a TOML literal and
    /// falls back to a bare string.
    pub fn push_assignment(&mut self, raw: &str) -> Result<(), Failure> {
        let (key, value) = raw
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("`{raw}` is not of the form section.key=value")))?;
        let key = key.trim();
        let value = value.trim();
        let parsed = toml::from_str::<Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(value.to_string()));
        self.set(key, parsed);
        Ok(())
    }
}

/// Loads `path` (or starts from defaults), applies `overrides`, and validates.
pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig, Failure> {
    let mut table = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::io(p, e))?;
            toml::from_str::<Table>(&text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    for (key, value) in &overrides.0 {
        let (section, field) = key
            .split_once('.')
            .ok_or_else(|| Failure::Config(format!("override key `{key}` must be section.field")))?;
        let entry = table
            .entry(section.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        let Value::Table(sub) = entry else {
            return Err(Failure::Config(format!("`{section}` is not a section")));
        };
        sub.insert(field.to_string(), value.clone());
    }
    if let Some(Value::String(a)) = table.get("model").and_then(|m| m.get("architecture")) {
        if Architecture::parse(a).is_none() {
            let known: Vec<_> = Architecture::ALL.iter().map(|a| a.cli_name()).collect();
            return Err(Failure::Config(format!("unknown variant `{a}` (expected one of {})", known.join(", "))));
        }
    }
    if let Some(Value::String(h)) = table.get("model").and_then(|m| m.get("head_variant")) {
        if HeadVariant::parse(h).is_none() {
            let known: Vec<_> = HeadVariant::ALL.iter().map(|v| v.cli_name()).collect();
            return Err(Failure::Config(format!("unknown head `{h}` (expected one of {})", known.join(", "))));
        }
    }
    let cfg: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Failure::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}
