//! TOML configuration file.
//!
//! ```toml
//! dual_label_policy = "prefer-hateful"   # prefer-hateful | prefer-neutral | drop
//! tendency_mode = "fold-local"           # fold-local | corpus-wide
//!
//! [train]                                # any TrainConfig field
//! hidden = 200
//! activation = "sigmoid"                 # sigmoid | tanh
//! feature_mode = "dense"                 # dense | pseudo-tokens
//!
//! [experiment]
//! preset = "desk"                        # desk | full
//! folds = 5                              # overrides the preset
//! runs = 3                               # overrides the preset
//! seed = 42
//! stratified_folds = false
//! ```
//!
//! Missing keys take their defaults; unknown keys are an error.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::TrainConfig;
use crate::corpus::DualLabelPolicy;
use crate::error::{Error, Result};
use crate::eval::{ExperimentPlan, Preset, Target};
use crate::features::TendencyMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub preset: Preset,
    pub folds: Option<usize>,
    pub runs: Option<usize>,
    pub seed: u64,
    pub stratified_folds: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            preset: Preset::Desk,
            folds: None,
            runs: None,
            seed: 42,
            stratified_folds: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub dual_label_policy: DualLabelPolicy,
    pub tendency_mode: TendencyMode,
    pub train: TrainConfig,
    pub experiment: ExperimentSection,
}

impl Config {
    pub fn from_toml(s: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&s).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Loads `path` if given, else the defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn plan(&self, target: Target) -> ExperimentPlan {
        let e = &self.experiment;
        let mut plan = ExperimentPlan::preset(target, e.preset, e.seed);
        if let Some(f) = e.folds {
            plan.folds = f;
        }
        if let Some(r) = e.runs {
            plan.runs = r;
        }
        plan.stratified_folds = e.stratified_folds;
        plan.tendency_mode = self.tendency_mode;
        plan.train = self.train.clone();
        plan
    }
}
