use std::io::Write;
use std::path::Path;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use crate::config::Approach;

pub const CSV_HEADER: &str = "seed,approach,theta_true,step,tracked_value,actual_return,theta_hat,wall_ms";

/// Pseudo-approach label for reference rows carrying the oracle value.
pub const ORACLE_LABEL: &str = "oracle";

/// One row of experiment output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub approach: String,
    pub theta_true: f64,
    pub step: u64,
    /// Estimated value of the initial state.
    pub tracked_value: f64,
    /// Discounted return accumulated by the run's actual law.
    pub actual_return: f64,
    /// Empty for approaches that never observe adherence.
    pub theta_hat: Option<f64>,
    pub wall_ms: u64,
}

impl RunRecord {
    pub fn approach(&self) -> Option<Approach> {
        self.approach.parse().ok()
    }
}

pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_csv(records: &[RunRecord], path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(records, std::io::BufWriter::new(file))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.deserialize().collect::<Result<_, _>>()?)
}
