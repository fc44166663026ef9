//! `manifest.json`: everything needed to reproduce an output directory.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::DualLabelPolicy;
use crate::error::{Error, Result};
use crate::eval::ExperimentPlan;
use crate::persist::FORMAT_VERSION;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

impl InputFile {
    pub fn hash(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(InputFile {
            path: std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf()),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }

    /// Errors when the file at `path` no longer has the recorded hash.
    pub fn verify(&self) -> Result<()> {
        let now = Self::hash(&self.path)?;
        if now.sha256 != self.sha256 {
            return Err(Error::Validation(format!(
                "{} changed since the manifest was written",
                self.path.display()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub fold: usize,
    pub member: String,
    pub run: usize,
    pub seed: u64,
}

/// Seeds of every training run an experiment performs.
pub fn experiment_seeds(plan: &ExperimentPlan) -> Vec<SeedRecord> {
    let mut seeds = Vec::new();
    for fold in 0..plan.folds {
        for member in plan.members() {
            for run in 0..plan.runs {
                seeds.push(SeedRecord {
                    fold,
                    member: member.to_string(),
                    run,
                    seed: plan.run_seed(fold, member, run),
                });
            }
        }
    }
    seeds
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub model_format_version: u32,
    pub input: InputFile,
    pub dual_label_policy: DualLabelPolicy,
    pub plan: ExperimentPlan,
    pub root_seed: u64,
    pub seeds: Vec<SeedRecord>,
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(
        command: &str,
        input: InputFile,
        policy: DualLabelPolicy,
        plan: &ExperimentPlan,
        seeds: Vec<SeedRecord>,
    ) -> Self {
        RunManifest {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            model_format_version: FORMAT_VERSION,
            input,
            dual_label_policy: policy,
            plan: plan.clone(),
            root_seed: plan.seed,
            seeds,
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }

    /// Reads a manifest file, or `manifest.json` inside a directory.
    pub fn read(path: &Path) -> Result<Self> {
        let path = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let s = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&s).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::EnsembleScheme;
    use crate::eval::{Preset, Target};

    #[test]
    fn manifest_round_trip_and_seed_count() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("c.tsv");
        std::fs::write(&data, "1\tu\tneutral\thi\n").unwrap();
        let plan = ExperimentPlan::preset(Target::Scheme(EnsembleScheme::Xi), Preset::Desk, 5);
        let m = RunManifest::new(
            "experiment",
            InputFile::hash(&data).unwrap(),
            DualLabelPolicy::default(),
            &plan,
            experiment_seeds(&plan),
        );
        assert_eq!(m.seeds.len(), 5 * 5 * 3);
        m.write(dir.path()).unwrap();
        assert_eq!(RunManifest::read(dir.path()).unwrap(), m);
        m.input.verify().unwrap();
        std::fs::write(&data, "changed").unwrap();
        assert!(m.input.verify().is_err());
    }
}
