use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::record::{save_csv, RunRecord};

pub const RECORDS_FILE: &str = "records.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.json";

/// Written next to every CSV so a run can be reproduced from it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    /// False for constant learning rates, which do not meet the step-size
    /// conditions of the convergence theorem.
    pub step_size_conditions_satisfied: bool,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Manifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash(config),
            seeds: config.seeds.clone(),
            step_size_conditions_satisfied: config.satisfies_step_size_conditions(),
            config: config.clone(),
        }
    }
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&json))
}

/// Writes `records.csv`, `manifest.json` and `summary.json` into `dir`.
pub fn write_run<S: Serialize>(
    dir: &Path,
    command: &str,
    config: &ExperimentConfig,
    records: &[RunRecord],
    summary: &S,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let csv_path = dir.join(RECORDS_FILE);
    save_csv(records, &csv_path)?;
    let manifest = Manifest::new(command, config);
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(summary)? + "\n")?;
    Ok(csv_path)
}
