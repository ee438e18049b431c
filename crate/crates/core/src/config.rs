//! TOML experiment configuration.
//!
//! ```toml
//! preset = "narma10"
//! mask_seeds = [1, 2, 3]
//! experiment_seed = 0
//! output_dir = "runs/narma10"
//!
//! [overrides]          # any TaskPreset field, plus alpha / nonlinearity
//! attenuation_db = 15.0
//!
//! [task]               # omitted: default generator for the preset
//! kind = "narma10"
//! length = 21000
//!
//! [grid]
//! beta2 = [0.0, 0.5, 1.0]
//! delays = [0, 9, 10]
//!
//! [sweep]
//! modes = ["delayed-input", "standard-no-delay"]
//! attenuation_grid_db = [2.0, 15.0]
//! ```
//!
//! Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{read_dataset, DatasetFile};
use crate::masking::MaskDistribution;
use crate::optimizer::{
    AttenuationMap, ClassificationProtocol, ExperimentSetup, ExperimentTask, PresetName, ScanGrid, StandardGrid,
    SweepMode, TaskPreset,
};
use crate::reservoir::{InitialState, Nonlinearity};
use crate::tasks::{generate_mackey_glass, generate_narma10, MackeyGlassParams, Narma10Params};
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_j0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attenuation_db: Option<f64>,
    /// Feedback α given directly; takes precedence over `attenuation_db`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinearity: Option<Nonlinearity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<InitialState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_distribution: Option<MaskDistribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskConfig {
    Narma10(Narma10Params),
    MackeyGlass(MackeyGlassParams),
    /// A dataset file written by `generate`; relative paths resolve against
    /// the config file's directory.
    Dataset {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        protocol: Option<ClassificationProtocol>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_modes")]
    pub modes: Vec<SweepMode>,
    #[serde(default = "default_attenuations")]
    pub attenuation_grid_db: Vec<f64>,
    #[serde(default)]
    pub standard: StandardGrid,
}

fn default_modes() -> Vec<SweepMode> {
    vec![SweepMode::DelayedInput, SweepMode::StandardNoDelay]
}

fn default_attenuations() -> Vec<f64> {
    vec![2.0, 15.0]
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            modes: default_modes(),
            attenuation_grid_db: default_attenuations(),
            standard: StandardGrid::default(),
        }
    }
}

fn default_mask_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: PresetName,
    #[serde(default = "default_mask_seeds")]
    pub mask_seeds: Vec<u64>,
    #[serde(default)]
    pub experiment_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub overrides: PresetOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskConfig>,
    #[serde(default)]
    pub grid: ScanGrid,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub attenuation_map: AttenuationMap,
}

impl ExperimentConfig {
    pub fn new(preset: PresetName) -> Self {
        Self {
            preset,
            mask_seeds: default_mask_seeds(),
            experiment_seed: 0,
            output_dir: None,
            overrides: PresetOverrides::default(),
            task: None,
            grid: ScanGrid::default(),
            sweep: SweepConfig::default(),
            attenuation_map: AttenuationMap::default(),
        }
    }

    /// Parses TOML; errors carry the line and column of the offending key.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.mask_seeds.is_empty() {
            return Err(Error::Config("mask_seeds must not be empty".into()));
        }
        self.grid.validate().map_err(|e| Error::Config(e.to_string()))?;
        match (&self.task, self.preset.is_classification()) {
            (Some(TaskConfig::Narma10(_) | TaskConfig::MackeyGlass(_)), true) => {
                return Err(Error::Config(format!(
                    "preset {} is a classification task but [task] is a series generator",
                    self.preset
                )));
            }
            (None, true) => {
                return Err(Error::Config(format!(
                    "preset {} needs a [task] with kind = \"dataset\"",
                    self.preset
                )));
            }
            _ => {}
        }
        Ok(())
    }

    /// Preset with overrides applied.
    pub fn preset(&self) -> TaskPreset {
        let mut p = TaskPreset::table(self.preset);
        let o = &self.overrides;
        if let Some(v) = o.beta1 {
            p.beta1 = v;
        }
        if let Some(v) = o.bias_j0 {
            p.bias_j0 = v;
        }
        if let Some(v) = o.attenuation_db {
            p.attenuation_db = v;
        }
        if let Some(v) = o.ridge_lambda {
            p.ridge_lambda = v;
        }
        if let Some(v) = o.n_nodes {
            p.n_nodes = v;
        }
        p
    }

    pub fn setup(&self) -> Result<ExperimentSetup> {
        let preset = self.preset();
        let mut setup = match self.overrides.alpha {
            Some(alpha) => ExperimentSetup::with_alpha(&preset, alpha),
            None => ExperimentSetup::from_preset(&preset, &self.attenuation_map)?,
        };
        if let Some(f) = self.overrides.nonlinearity {
            setup.nonlinearity = f;
        }
        if let Some(init) = self.overrides.initial_state {
            setup.initial_state = init;
        }
        if let Some(d) = self.overrides.mask_distribution {
            setup.mask_distribution = d;
        }
        Ok(setup)
    }

    /// Builds (or loads) the task data. `base_dir` anchors relative dataset
    /// paths.
    pub fn build_task(&self, base_dir: &Path) -> Result<ExperimentTask> {
        let task = match &self.task {
            None => match self.preset {
                PresetName::Narma10 => TaskConfig::Narma10(Narma10Params::default()),
                PresetName::MackeyGlass => TaskConfig::MackeyGlass(MackeyGlassParams::default()),
                _ => unreachable!("validated: classification presets carry a dataset task"),
            },
            Some(t) => t.clone(),
        };
        match task {
            TaskConfig::Narma10(p) => Ok(ExperimentTask::Series(generate_narma10(&p)?)),
            TaskConfig::MackeyGlass(p) => Ok(ExperimentTask::Series(generate_mackey_glass(&p)?)),
            TaskConfig::Dataset { path, protocol } => {
                let full = if path.is_absolute() { path } else { base_dir.join(path) };
                match read_dataset(&full)? {
                    DatasetFile::Series(t) if !self.preset.is_classification() => Ok(ExperimentTask::Series(t)),
                    DatasetFile::Utterances(dataset) if self.preset.is_classification() => {
                        let protocol = protocol.unwrap_or(match self.preset {
                            PresetName::Speakers => ClassificationProtocol::RandomResplit {
                                train_count: 270,
                                repeats: 10,
                                seed: self.experiment_seed,
                            },
                            _ => ClassificationProtocol::KFold { k: 10 },
                        });
                        Ok(ExperimentTask::Classification { dataset, protocol })
                    }
                    _ => Err(Error::Config(format!(
                        "dataset {} does not match preset {}",
                        full.display(),
                        self.preset
                    ))),
                }
            }
        }
    }
}
