//! Benchmark environments.

mod inventory;
mod machine;

pub use inventory::{build_inventory, ss_baseline, HoldingBase, InventoryParams};
pub use machine::{
    build_machine_replacement, default_machine_replacement, machine_baseline, machine_from_document, ACTION_LABELS,
    BROKEN, DEFAULT_TRANSITIONS, LONG_REPAIR, N_STATES, REPAIR, SHORT_REPAIR, STATE_LABELS, STATE_REWARDS, WAIT,
};

use std::path::Path;

use crate::error::{invalid, Result};
use crate::mdp::{DeterministicPolicy, FiniteMdp, MdpDocument};

/// A ready-to-run environment: model, baseline law and start state.
#[derive(Debug, Clone)]
pub struct Environment {
    pub name: String,
    pub mdp: FiniteMdp,
    pub baseline: DeterministicPolicy,
    pub initial_state: usize,
    /// Independent copies of the model run side by side.
    pub items: usize,
}

impl Environment {
    pub fn machine_replacement() -> Self {
        let (mdp, baseline) = default_machine_replacement();
        Environment {
            name: "machine_replacement".into(),
            mdp,
            baseline,
            initial_state: 0,
            items: 1,
        }
    }

    pub fn inventory(params: &InventoryParams) -> Result<Self> {
        Ok(Environment {
            name: if params.capacity == 100 {
                "inventory".into()
            } else {
                format!("inventory_{}", params.capacity)
            },
            mdp: build_inventory(params)?,
            baseline: ss_baseline(params),
            initial_state: params.initial_state,
            items: params.items,
        })
    }

    /// An MDP document carrying its own baseline law.
    pub fn from_document(name: impl Into<String>, doc: &MdpDocument) -> Result<Self> {
        let mdp = doc.to_mdp()?;
        let baseline = doc
            .baseline_for(&mdp)?
            .ok_or_else(|| invalid("MDP document has no baseline law"))?;
        let initial_state = doc.initial_state.unwrap_or(0);
        mdp.check_state(initial_state)?;
        Ok(Environment {
            name: name.into(),
            mdp,
            baseline,
            initial_state,
            items: 1,
        })
    }

    /// Resolves a preset name (`machine_replacement`, `inventory`,
    /// `inventory_small`) or a path to an MDP document.
    pub fn resolve(spec: &str) -> Result<Self> {
        match spec {
            "machine_replacement" | "machine" => Ok(Self::machine_replacement()),
            "inventory" => Self::inventory(&InventoryParams::default()),
            "inventory_small" | "inventory_40" => Self::inventory(&InventoryParams::reduced()),
            path => {
                let path = Path::new(path);
                if !path.exists() {
                    return Err(invalid(format!("unknown environment {spec:?}")));
                }
                let name = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("external")
                    .to_string();
                Self::from_document(name, &MdpDocument::load(path)?)
            }
        }
    }
}
