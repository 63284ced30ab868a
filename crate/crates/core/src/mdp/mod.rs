//! Finite discounted MDPs: model, policies, action-value tables and policy
//! evaluation.

mod eval;
mod format;
mod policy;
mod table;

pub use eval::{evaluate_law_exact, evaluate_policy_exact, rollout_return, sample_transition, Evaluation};
pub use format::MdpDocument;
pub use policy::{greedy_policy, greedy_policy_masked, mix_law, DeterministicPolicy, MixedLaw};
pub use table::{QTable, ValueVector};

use crate::error::{invalid, Error, Result};

/// Tolerance on transition row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// A finite, infinite-horizon discounted MDP.
///
/// Transition probabilities are stored densely as `P[x][u][x']` in a flat
/// buffer. Every `(x, u)` row is a probability distribution, including rows
/// for actions that are not admissible in `x`; admissibility is a separate
/// mask consulted by the planners and learners.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    discount: f64,
    admissible: Vec<Vec<usize>>,
    state_labels: Option<Vec<String>>,
    action_labels: Option<Vec<String>>,
}

impl FiniteMdp {
    /// Builds an MDP from nested tables `transition[x][u][x']` and
    /// `reward[x][u]`. All actions are admissible everywhere.
    pub fn new(transition: Vec<Vec<Vec<f64>>>, reward: Vec<Vec<f64>>, discount: f64) -> Result<Self> {
        let n_states = transition.len();
        if n_states == 0 {
            return Err(invalid("an MDP needs at least one state"));
        }
        let n_actions = transition[0].len();
        if n_actions == 0 {
            return Err(invalid("an MDP needs at least one action"));
        }
        let mut flat_p = Vec::with_capacity(n_states * n_actions * n_states);
        for (x, per_action) in transition.iter().enumerate() {
            if per_action.len() != n_actions {
                return Err(invalid(format!(
                    "transition[{x}] has {} actions, expected {n_actions}",
                    per_action.len()
                )));
            }
            for (u, row) in per_action.iter().enumerate() {
                if row.len() != n_states {
                    return Err(Error::InvalidTransitionRow {
                        state: x,
                        action: u,
                        reason: format!("length {} but there are {n_states} states", row.len()),
                    });
                }
                flat_p.extend_from_slice(row);
            }
        }
        if reward.len() != n_states {
            return Err(invalid(format!(
                "reward has {} rows, expected {n_states}",
                reward.len()
            )));
        }
        let mut flat_r = Vec::with_capacity(n_states * n_actions);
        for (x, row) in reward.iter().enumerate() {
            if row.len() != n_actions {
                return Err(invalid(format!(
                    "reward[{x}] has {} entries, expected {n_actions}",
                    row.len()
                )));
            }
            flat_r.extend_from_slice(row);
        }
        Self::from_flat(n_states, n_actions, flat_p, flat_r, discount)
    }

    /// Builds an MDP from row-major flat buffers.
    pub fn from_flat(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        discount: f64,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(invalid("an MDP needs at least one state and one action"));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(invalid("transition buffer has the wrong length"));
        }
        if reward.len() != n_states * n_actions {
            return Err(invalid("reward buffer has the wrong length"));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(invalid(format!(
                "discount must lie strictly inside (0, 1), got {discount}"
            )));
        }
        if let Some(i) = reward.iter().position(|r| !r.is_finite()) {
            return Err(invalid(format!(
                "reward for state {}, action {} is not finite",
                i / n_actions,
                i % n_actions
            )));
        }
        let mdp = FiniteMdp {
            n_states,
            n_actions,
            transition,
            reward,
            discount,
            admissible: vec![(0..n_actions).collect(); n_states],
            state_labels: None,
            action_labels: None,
        };
        mdp.validate_rows()?;
        Ok(mdp)
    }

    fn validate_rows(&self) -> Result<()> {
        for x in 0..self.n_states {
            for u in 0..self.n_actions {
                let row = self.row(x, u);
                if let Some(bad) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
                    return Err(Error::InvalidTransitionRow {
                        state: x,
                        action: u,
                        reason: format!("entry {bad} is negative or not finite"),
                    });
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                    return Err(Error::InvalidTransitionRow {
                        state: x,
                        action: u,
                        reason: format!("sums to {sum}"),
                    });
                }
            }
        }
        Ok(())
    }

    /// Restricts the actions available in each state. Lists are sorted and
    /// deduplicated; each must be non-empty.
    pub fn with_admissible(mut self, admissible: Vec<Vec<usize>>) -> Result<Self> {
        if admissible.len() != self.n_states {
            return Err(invalid(format!(
                "admissible sets given for {} states, expected {}",
                admissible.len(),
                self.n_states
            )));
        }
        let mut cleaned = Vec::with_capacity(self.n_states);
        for (x, mut set) in admissible.into_iter().enumerate() {
            set.sort_unstable();
            set.dedup();
            if set.is_empty() {
                return Err(Error::NoAdmissibleAction(x));
            }
            if let Some(&u) = set.iter().find(|&&u| u >= self.n_actions) {
                return Err(invalid(format!("admissible action {u} in state {x} is out of range")));
            }
            cleaned.push(set);
        }
        self.admissible = cleaned;
        Ok(self)
    }

    pub fn with_labels(mut self, states: Option<Vec<String>>, actions: Option<Vec<String>>) -> Result<Self> {
        if let Some(s) = &states {
            if s.len() != self.n_states {
                return Err(invalid("state label count does not match n_states"));
            }
        }
        if let Some(a) = &actions {
            if a.len() != self.n_actions {
                return Err(invalid("action label count does not match n_actions"));
            }
        }
        self.state_labels = states;
        self.action_labels = actions;
        Ok(self)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    #[inline]
    pub fn reward(&self, x: usize, u: usize) -> f64 {
        self.reward[x * self.n_actions + u]
    }

    /// The distribution `P[x][u][·]`.
    #[inline]
    pub fn row(&self, x: usize, u: usize) -> &[f64] {
        let start = (x * self.n_actions + u) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    #[inline]
    pub fn prob(&self, x: usize, u: usize, next: usize) -> f64 {
        self.row(x, u)[next]
    }

    /// `Σ_x' P(x'|x,u) · values[x']`.
    #[inline]
    pub fn expected_next(&self, x: usize, u: usize, values: &[f64]) -> f64 {
        self.row(x, u).iter().zip(values).map(|(p, v)| p * v).sum()
    }

    pub fn admissible(&self, x: usize) -> &[usize] {
        &self.admissible[x]
    }

    pub fn admissible_sets(&self) -> &[Vec<usize>] {
        &self.admissible
    }

    pub fn is_admissible(&self, x: usize, u: usize) -> bool {
        self.admissible[x].binary_search(&u).is_ok()
    }

    pub fn all_admissible(&self) -> bool {
        self.admissible.iter().all(|s| s.len() == self.n_actions)
    }

    pub fn state_labels(&self) -> Option<&[String]> {
        self.state_labels.as_deref()
    }

    pub fn action_labels(&self) -> Option<&[String]> {
        self.action_labels.as_deref()
    }

    pub fn state_label(&self, x: usize) -> String {
        match &self.state_labels {
            Some(l) => l[x].clone(),
            None => x.to_string(),
        }
    }

    pub fn action_label(&self, u: usize) -> String {
        match &self.action_labels {
            Some(l) => l[u].clone(),
            None => u.to_string(),
        }
    }

    /// Smallest and largest reward over admissible pairs.
    pub fn reward_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in 0..self.n_states {
            for &u in self.admissible(x) {
                let r = self.reward(x, u);
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        (lo, hi)
    }

    pub fn check_state(&self, x: usize) -> Result<()> {
        if x < self.n_states {
            Ok(())
        } else {
            Err(invalid(format!(
                "state {x} out of range (n_states = {})",
                self.n_states
            )))
        }
    }

    pub fn check_action(&self, u: usize) -> Result<()> {
        if u < self.n_actions {
            Ok(())
        } else {
            Err(invalid(format!(
                "action {u} out of range (n_actions = {})",
                self.n_actions
            )))
        }
    }
}
