//! Single-item inventory control with uniform demand and an (s, S) baseline.
//!
//! State: stock on hand `x ∈ {0..capacity}`. Action: order quantity `u`,
//! admissible when `x + u ≤ capacity`. Demand `d` is uniform on
//! `{0..max_demand}`, orders arrive before demand, and
//! `x' = max(0, x + u − d)`. Expected one-step reward:
//!
//! ```text
//! R(x, u) = p · E[min(x + u, d)] − holding(x, u) − c · u
//! ```
//!
//! with `holding = h · max(0, x − u)` ([`HoldingBase::Surplus`]) or
//! `h · E[max(0, x + u − d)]` ([`HoldingBase::Leftover`]).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mdp::{DeterministicPolicy, FiniteMdp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoldingBase {
    /// `h · max(0, x − u)`.
    Surplus,
    /// `h · E[max(0, x + u − d)]`, stock left after demand.
    Leftover,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryParams {
    pub capacity: usize,
    /// Demand is uniform on `{0..=max_demand}`.
    pub max_demand: usize,
    pub price: f64,
    pub holding_cost: f64,
    pub order_cost: f64,
    /// Reorder threshold `s`.
    pub reorder_point: usize,
    /// Order quantity `S`.
    pub order_quantity: usize,
    /// Number of independent items; each is a copy of the single-item MDP.
    #[serde(default = "one")]
    pub items: usize,
    #[serde(default = "surplus_base")]
    pub holding_base: HoldingBase,
    pub discount: f64,
    #[serde(default)]
    pub initial_state: usize,
}

fn one() -> usize {
    1
}

fn surplus_base() -> HoldingBase {
    HoldingBase::Surplus
}

impl Default for InventoryParams {
    fn default() -> Self {
        InventoryParams {
            capacity: 100,
            max_demand: 100,
            price: 4.0,
            holding_cost: 1.0,
            order_cost: 2.0,
            reorder_point: 20,
            order_quantity: 40,
            items: 1,
            holding_base: HoldingBase::Surplus,
            discount: 0.9,
            initial_state: 0,
        }
    }
}

impl InventoryParams {
    /// Capacity-40 variant with demand and (s, S) scaled alike.
    pub fn reduced() -> Self {
        InventoryParams {
            capacity: 40,
            max_demand: 40,
            reorder_point: 8,
            order_quantity: 16,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(invalid("inventory capacity must be positive"));
        }
        if self.reorder_point > self.capacity {
            return Err(invalid("reorder point exceeds capacity"));
        }
        if self.order_quantity == 0 || self.order_quantity > self.capacity {
            return Err(invalid("order quantity must lie in (0, capacity]"));
        }
        for (name, v) in [
            ("price", self.price),
            ("holding cost", self.holding_cost),
            ("order cost", self.order_cost),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid(format!("{name} must be finite and non-negative")));
            }
        }
        if self.items == 0 {
            return Err(invalid("at least one item is required"));
        }
        if self.initial_state > self.capacity {
            return Err(invalid("initial stock exceeds capacity"));
        }
        Ok(())
    }

    fn demand_outcomes(&self) -> f64 {
        (self.max_demand + 1) as f64
    }

    /// `E[min(level, d)]` for uniform demand.
    pub fn expected_sales(&self, level: usize) -> f64 {
        let d_max = self.max_demand;
        let total = if level <= d_max {
            // Σ_{d<level} d + (d_max − level + 1) · level
            (level * level.saturating_sub(1) / 2 + (d_max - level + 1) * level) as f64
        } else {
            (d_max * (d_max + 1) / 2) as f64
        };
        total / self.demand_outcomes()
    }

    /// Expected one-step reward of ordering `u` at stock `x`.
    pub fn expected_reward(&self, x: usize, u: usize) -> f64 {
        let level = x + u;
        let sales = self.expected_sales(level);
        let holding = match self.holding_base {
            HoldingBase::Surplus => self.holding_cost * x.saturating_sub(u) as f64,
            HoldingBase::Leftover => self.holding_cost * (level as f64 - sales),
        };
        self.price * sales - holding - self.order_cost * u as f64
    }
}

/// Builds the single-item MDP. Inadmissible orders (`x + u > capacity`) get
/// the row and reward of the largest admissible order.
pub fn build_inventory(params: &InventoryParams) -> Result<FiniteMdp> {
    params.validate()?;
    let n = params.capacity + 1;
    let outcomes = params.demand_outcomes();
    let mut transition = vec![0.0; n * n * n];
    let mut reward = vec![0.0; n * n];
    let mut admissible = Vec::with_capacity(n);
    for x in 0..n {
        for u in 0..n {
            let order = u.min(params.capacity - x);
            let level = x + order;
            let row = &mut transition[(x * n + u) * n..(x * n + u + 1) * n];
            if level <= params.max_demand {
                // d ≥ level empties the shelf, each smaller d leaves level − d
                row[0] = (params.max_demand - level + 1) as f64 / outcomes;
                for slot in row.iter_mut().take(level + 1).skip(1) {
                    *slot = 1.0 / outcomes;
                }
            } else {
                for slot in row.iter_mut().take(level + 1).skip(level - params.max_demand) {
                    *slot = 1.0 / outcomes;
                }
            }
            reward[x * n + u] = params.expected_reward(x, order);
        }
        admissible.push((0..=params.capacity - x).collect());
    }
    let labels = (0..n).map(|x| x.to_string()).collect::<Vec<_>>();
    FiniteMdp::from_flat(n, n, transition, reward, params.discount)?
        .with_admissible(admissible)?
        .with_labels(Some(labels.clone()), Some(labels))
}

/// `(s, S)` rule: order `min(S, capacity − x)` when `x ≤ s`, nothing otherwise.
pub fn ss_baseline(params: &InventoryParams) -> DeterministicPolicy {
    DeterministicPolicy::new(
        (0..=params.capacity)
            .map(|x| {
                if x <= params.reorder_point {
                    params.order_quantity.min(params.capacity - x)
                } else {
                    0
                }
            })
            .collect(),
    )
}
