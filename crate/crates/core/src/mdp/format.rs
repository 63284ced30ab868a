//! JSON interchange document for finite MDPs.
//!
//! ```json
//! {
//!   "n_states": 2, "n_actions": 1, "discount": 0.9,
//!   "reward": [[1.0], [0.0]],
//!   "transition": [[[0.0, 1.0]], [[1.0, 0.0]]],
//!   "baseline": [0, 0],
//!   "initial_state": 0
//! }
//! ```
//!
//! `reward` is states × actions, `transition[x][u]` is the next-state
//! distribution. `admissible`, `state_labels`, `action_labels`, `baseline`
//! and `initial_state` are optional.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{DeterministicPolicy, FiniteMdp};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpDocument {
    pub n_states: usize,
    pub n_actions: usize,
    pub discount: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_labels: Option<Vec<String>>,
    pub reward: Vec<Vec<f64>>,
    pub transition: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub admissible: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<usize>,
}

impl MdpDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("MDP document serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Validates the document and builds the MDP.
    pub fn to_mdp(&self) -> Result<FiniteMdp> {
        if self.transition.len() != self.n_states {
            return Err(invalid(format!(
                "transition has {} state blocks but n_states = {}",
                self.transition.len(),
                self.n_states
            )));
        }
        if self.transition.iter().any(|b| b.len() != self.n_actions) {
            return Err(invalid(format!(
                "every transition block must list n_actions = {} rows",
                self.n_actions
            )));
        }
        let mut mdp = FiniteMdp::new(self.transition.clone(), self.reward.clone(), self.discount)?
            .with_labels(self.state_labels.clone(), self.action_labels.clone())?;
        if let Some(adm) = &self.admissible {
            mdp = mdp.with_admissible(adm.clone())?;
        }
        Ok(mdp)
    }

    /// Baseline law, if the document carries one, validated against `mdp`.
    pub fn baseline_for(&self, mdp: &FiniteMdp) -> Result<Option<DeterministicPolicy>> {
        match &self.baseline {
            None => Ok(None),
            Some(actions) => {
                let policy = DeterministicPolicy::new(actions.clone());
                policy.validate_for(mdp)?;
                Ok(Some(policy))
            }
        }
    }

    pub fn from_mdp(mdp: &FiniteMdp) -> Self {
        let (n, m) = (mdp.n_states(), mdp.n_actions());
        MdpDocument {
            n_states: n,
            n_actions: m,
            discount: mdp.discount(),
            state_labels: mdp.state_labels().map(<[String]>::to_vec),
            action_labels: mdp.action_labels().map(<[String]>::to_vec),
            reward: (0..n).map(|x| (0..m).map(|u| mdp.reward(x, u)).collect()).collect(),
            transition: (0..n)
                .map(|x| (0..m).map(|u| mdp.row(x, u).to_vec()).collect())
                .collect(),
            admissible: if mdp.all_admissible() {
                None
            } else {
                Some(mdp.admissible_sets().to_vec())
            },
            baseline: None,
            initial_state: None,
        }
    }

    pub fn with_baseline(mut self, baseline: &DeterministicPolicy) -> Self {
        self.baseline = Some(baseline.actions().to_vec());
        self
    }
}
