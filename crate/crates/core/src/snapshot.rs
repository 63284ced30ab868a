//! Versioned learner snapshot files.

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::adherence::AdherenceEstimate;
use crate::error::{Error, Result};
use crate::learner::{LearnerConfig, LearnerState};
use crate::mdp::{FiniteMdp, QTable};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSnapshot {
    pub version: u32,
    pub config_hash: String,
    pub n_states: usize,
    pub n_actions: usize,
    /// Row-major Q values.
    pub q: Vec<f64>,
    pub theta_hat: f64,
    pub n: u64,
    pub adheres: u64,
    pub prior: f64,
    pub visit_counts: Vec<u64>,
    pub step: u64,
}

impl LearnerState {
    pub fn snapshot(&self) -> LearnerSnapshot {
        LearnerSnapshot {
            version: SNAPSHOT_VERSION,
            config_hash: self.config.hash(),
            n_states: self.q.n_states(),
            n_actions: self.q.n_actions(),
            q: self.q.as_slice().to_vec(),
            theta_hat: self.adherence.theta_hat(),
            n: self.adherence.n(),
            adheres: self.adherence.adheres(),
            prior: self.adherence.prior(),
            visit_counts: self.visit_counts.clone(),
            step: self.step,
        }
    }

    /// Rebuilds a learner from a snapshot taken under `config`.
    pub fn restore(mdp: &FiniteMdp, config: LearnerConfig, snap: &LearnerSnapshot) -> Result<Self> {
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!(
                "unsupported snapshot version {}",
                snap.version
            )));
        }
        if snap.config_hash != config.hash() {
            return Err(Error::Snapshot(
                "snapshot was taken under a different learner config".into(),
            ));
        }
        let cells = mdp.n_states() * mdp.n_actions();
        if snap.n_states != mdp.n_states()
            || snap.n_actions != mdp.n_actions()
            || snap.q.len() != cells
            || snap.visit_counts.len() != cells
        {
            return Err(Error::Snapshot("snapshot dimensions do not match the MDP".into()));
        }
        if snap.q.iter().any(|v| !v.is_finite()) {
            return Err(Error::Snapshot("snapshot Q table has non-finite entries".into()));
        }
        let adherence = AdherenceEstimate::from_counts(snap.adheres, snap.n, snap.prior)?;
        if adherence.theta_hat().to_bits() != snap.theta_hat.to_bits() {
            return Err(Error::Snapshot("theta_hat disagrees with the adherence counts".into()));
        }
        let mut state = LearnerState::new(mdp, config)?;
        state.q = QTable::from_flat(snap.n_states, snap.n_actions, snap.q.clone());
        state.adherence = adherence;
        state.visit_counts = snap.visit_counts.clone();
        state.step = snap.step;
        Ok(state)
    }
}

impl LearnerSnapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
