use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FiniteMdp, QTable};
use crate::error::{invalid, Result};

/// A stationary deterministic law mapping each state to one action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeterministicPolicy(Vec<usize>);

impl DeterministicPolicy {
    pub fn new(actions: Vec<usize>) -> Self {
        DeterministicPolicy(actions)
    }

    /// The same action in every state.
    pub fn constant(n_states: usize, action: usize) -> Self {
        DeterministicPolicy(vec![action; n_states])
    }

    #[inline]
    pub fn action(&self, x: usize) -> usize {
        self.0[x]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    /// Checks that the policy is total over `mdp`'s states and only picks
    /// admissible actions.
    pub fn validate_for(&self, mdp: &FiniteMdp) -> Result<()> {
        if self.0.len() != mdp.n_states() {
            return Err(invalid(format!(
                "policy covers {} states, MDP has {}",
                self.0.len(),
                mdp.n_states()
            )));
        }
        for (x, &u) in self.0.iter().enumerate() {
            mdp.check_action(u)?;
            if !mdp.is_admissible(x, u) {
                return Err(invalid(format!("policy picks inadmissible action {u} in state {x}")));
            }
        }
        Ok(())
    }
}

/// The law actually driving the system: the recommendation with probability
/// `theta`, the baseline otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedLaw {
    theta: f64,
    recommend: DeterministicPolicy,
    baseline: DeterministicPolicy,
}

/// Mixes a recommendation law and a baseline law at adherence `theta`.
pub fn mix_law(theta: f64, recommend: DeterministicPolicy, baseline: DeterministicPolicy) -> Result<MixedLaw> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(invalid(format!("adherence level must lie in [0, 1], got {theta}")));
    }
    if recommend.len() != baseline.len() {
        return Err(invalid(format!(
            "recommendation law covers {} states but baseline covers {}",
            recommend.len(),
            baseline.len()
        )));
    }
    Ok(MixedLaw {
        theta,
        recommend,
        baseline,
    })
}

impl MixedLaw {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn recommend(&self) -> &DeterministicPolicy {
        &self.recommend
    }

    pub fn baseline(&self) -> &DeterministicPolicy {
        &self.baseline
    }

    pub fn n_states(&self) -> usize {
        self.recommend.len()
    }

    /// Probability of playing `u` in state `x`.
    pub fn prob(&self, x: usize, u: usize) -> f64 {
        let (r, b) = (self.recommend.action(x), self.baseline.action(x));
        let mut p = 0.0;
        if u == r {
            p += self.theta;
        }
        if u == b {
            p += 1.0 - self.theta;
        }
        p
    }

    /// `(action, probability)` pairs with the recommendation first. When the
    /// two laws agree at `x` only one pair with mass 1 is returned.
    pub fn distribution(&self, x: usize) -> Vec<(usize, f64)> {
        let (r, b) = (self.recommend.action(x), self.baseline.action(x));
        if r == b {
            vec![(r, 1.0)]
        } else {
            vec![(r, self.theta), (b, 1.0 - self.theta)]
        }
    }

    /// Draws one action. Always consumes exactly one uniform draw.
    pub fn sample<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> usize {
        let draw: f64 = rng.random();
        if draw < self.theta {
            self.recommend.action(x)
        } else {
            self.baseline.action(x)
        }
    }
}

/// Arg-max of every row of `q`, lowest action index on ties.
pub fn greedy_policy(q: &QTable) -> DeterministicPolicy {
    DeterministicPolicy((0..q.n_states()).map(|x| q.best(x).0).collect())
}

/// Arg-max of every row restricted to the admissible actions of `mdp`.
pub fn greedy_policy_masked(q: &QTable, mdp: &FiniteMdp) -> DeterministicPolicy {
    DeterministicPolicy(
        (0..q.n_states())
            .map(|x| q.best_among(x, mdp.admissible(x)).0)
            .collect(),
    )
}
