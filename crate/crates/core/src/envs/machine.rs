//! Ten-state machine replacement: condition states `1..=8` (8 = broken),
//! short repair `S` and long repair `L`; actions `repair` and `wait`.
//!
//! Rewards depend on the state only. Transition tables are supplied as an MDP
//! document; a default deterioration chain ships with the crate.

use crate::error::{invalid, Result};
use crate::mdp::{DeterministicPolicy, FiniteMdp, MdpDocument};

pub const N_STATES: usize = 10;
pub const REPAIR: usize = 0;
pub const WAIT: usize = 1;

pub const STATE_LABELS: [&str; N_STATES] = ["1", "2", "3", "4", "5", "6", "7", "8", "S", "L"];
pub const ACTION_LABELS: [&str; 2] = ["repair", "wait"];

pub const BROKEN: usize = 7;
pub const SHORT_REPAIR: usize = 8;
pub const LONG_REPAIR: usize = 9;

/// Reward of each state, in [`STATE_LABELS`] order.
pub const STATE_REWARDS: [f64; N_STATES] = [20.0, 20.0, 20.0, 20.0, 20.0, 20.0, 20.0, 0.0, 18.0, 20.0];

pub const DEFAULT_TRANSITIONS: &str = include_str!("../../data/machine_replacement.json");

/// Wait while working or in long repair, repair when broken or in short repair.
pub fn machine_baseline() -> DeterministicPolicy {
    DeterministicPolicy::new(
        (0..N_STATES)
            .map(|x| if x == BROKEN || x == SHORT_REPAIR { REPAIR } else { WAIT })
            .collect(),
    )
}

/// Builds the MDP from `transition[x][u][x']` tables.
pub fn build_machine_replacement(
    transition: Vec<Vec<Vec<f64>>>,
    discount: f64,
) -> Result<(FiniteMdp, DeterministicPolicy)> {
    if transition.len() != N_STATES || transition.iter().any(|b| b.len() != 2) {
        return Err(invalid("machine replacement transitions must be 10 states × 2 actions"));
    }
    let reward = STATE_REWARDS.iter().map(|&r| vec![r, r]).collect();
    let mdp = FiniteMdp::new(transition, reward, discount)?.with_labels(
        Some(STATE_LABELS.iter().map(|s| s.to_string()).collect()),
        Some(ACTION_LABELS.iter().map(|s| s.to_string()).collect()),
    )?;
    Ok((mdp, machine_baseline()))
}

/// Builds the MDP from a transition config document. A reward table in the
/// document must agree with the fixed state rewards.
pub fn machine_from_document(doc: &MdpDocument) -> Result<(FiniteMdp, DeterministicPolicy)> {
    if doc.n_states != N_STATES || doc.n_actions != 2 {
        return Err(invalid(format!(
            "machine replacement config must be 10 × 2, got {} × {}",
            doc.n_states, doc.n_actions
        )));
    }
    for (x, row) in doc.reward.iter().enumerate() {
        if row.iter().any(|&r| r != STATE_REWARDS[x]) {
            return Err(invalid(format!(
                "reward row {x} differs from the machine replacement rewards"
            )));
        }
    }
    build_machine_replacement(doc.transition.clone(), doc.discount)
}

/// The bundled default model.
pub fn default_machine_replacement() -> (FiniteMdp, DeterministicPolicy) {
    let doc = MdpDocument::from_json(DEFAULT_TRANSITIONS).expect("bundled config parses");
    machine_from_document(&doc).expect("bundled config is valid")
}
