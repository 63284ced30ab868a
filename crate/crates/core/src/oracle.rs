//! Exact adherence-aware dynamic programming.
//!
//! The operator mixes the optimality backup (weight θ) with the baseline
//! backup (weight 1 − θ):
//!
//! ```text
//! (Jq)(x, ·) = θ · max_{u^r} Σ_x' P(x'|x,u^r) [R(x,u^r) + λ q(x',u^r)]
//!            + (1 − θ) · Σ_x' P(x'|x,u^b) [R(x,u^b) + λ q(x',u^b)],   u^b = g_b(x)
//! ```
//!
//! The right-hand side does not depend on the action index, so the result is
//! replicated across each row. It is a λ-contraction in the sup norm. Its
//! fixed point gives the optimal mixed value `V*`; the action-indexed target
//! that the learner approximates is the one-step lookahead
//! `q*(x,u) = R(x,u) + λ Σ_x' P(x'|x,u) V*(x')`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mdp::{greedy_policy_masked, DeterministicPolicy, FiniteMdp, QTable, ValueVector};

/// Fixed point of the adherence-aware operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleSolution {
    pub theta: f64,
    pub v_star: ValueVector,
    pub q_star: QTable,
    /// Greedy recommendation law of `q_star` over admissible actions.
    pub g_r_star: DeterministicPolicy,
    pub iterations: usize,
    /// Sup-norm change of the final operator application.
    pub residual: f64,
}

impl OracleSolution {
    /// `θ · max_u q*(x,u) + (1 − θ) · q*(x, g_b(x))`.
    pub fn mixed_value(&self, mdp: &FiniteMdp, baseline: &DeterministicPolicy, x: usize) -> f64 {
        let (_, best) = self.q_star.best_among(x, mdp.admissible(x));
        self.theta * best + (1.0 - self.theta) * self.q_star.get(x, baseline.action(x))
    }
}

fn check_inputs(mdp: &FiniteMdp, baseline: &DeterministicPolicy, theta: f64, q: &QTable) -> Result<()> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(invalid(format!("adherence level must lie in [0, 1], got {theta}")));
    }
    baseline.validate_for(mdp)?;
    if q.n_states() != mdp.n_states() || q.n_actions() != mdp.n_actions() {
        return Err(invalid("Q table dimensions do not match the MDP"));
    }
    if !q.is_finite() {
        return Err(invalid("Q table has non-finite entries"));
    }
    Ok(())
}

/// One application of the adherence-aware operator.
pub fn apply_operator(mdp: &FiniteMdp, baseline: &DeterministicPolicy, theta: f64, q: &QTable) -> Result<QTable> {
    check_inputs(mdp, baseline, theta, q)?;
    let mut out = QTable::zeros(mdp.n_states(), mdp.n_actions());
    apply_into(mdp, baseline, theta, q, &mut out);
    Ok(out)
}

fn apply_into(mdp: &FiniteMdp, baseline: &DeterministicPolicy, theta: f64, q: &QTable, out: &mut QTable) {
    let n = mdp.n_states();
    let lambda = mdp.discount();
    let mut column = vec![0.0; n];
    // backup[x][u] = R(x,u) + λ Σ_x' P(x'|x,u) q(x',u), computed column by column
    let mut backup = QTable::zeros(n, mdp.n_actions());
    for u in 0..mdp.n_actions() {
        for (x_next, c) in column.iter_mut().enumerate() {
            *c = q.get(x_next, u);
        }
        for x in 0..n {
            if mdp.is_admissible(x, u) {
                backup.set(x, u, mdp.reward(x, u) + lambda * mdp.expected_next(x, u, &column));
            }
        }
    }
    for x in 0..n {
        let (_, best) = backup.best_among(x, mdp.admissible(x));
        let value = theta * best + (1.0 - theta) * backup.get(x, baseline.action(x));
        out.row_mut(x).fill(value);
    }
}

/// Iterates the operator from `Q⁰ = 0`.
///
/// Stops once the sup-norm change falls to `tol·(1−λ)/λ`, which bounds the
/// distance to the fixed point by `tol`.
pub fn value_iteration(
    mdp: &FiniteMdp,
    baseline: &DeterministicPolicy,
    theta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<OracleSolution> {
    let init = QTable::zeros(mdp.n_states(), mdp.n_actions());
    value_iteration_from(mdp, baseline, theta, tol, max_iter, init)
}

/// [`value_iteration`] from an arbitrary finite starting table.
pub fn value_iteration_from(
    mdp: &FiniteMdp,
    baseline: &DeterministicPolicy,
    theta: f64,
    tol: f64,
    max_iter: usize,
    init: QTable,
) -> Result<OracleSolution> {
    if !(tol > 0.0) {
        return Err(invalid("value iteration tolerance must be positive"));
    }
    check_inputs(mdp, baseline, theta, &init)?;
    let lambda = mdp.discount();
    let threshold = tol * (1.0 - lambda) / lambda;

    let mut current = init;
    let mut next = QTable::zeros(mdp.n_states(), mdp.n_actions());
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iter {
        apply_into(mdp, baseline, theta, &current, &mut next);
        residual = next.sup_distance(&current);
        std::mem::swap(&mut current, &mut next);
        if residual <= threshold {
            let v_star = ValueVector((0..mdp.n_states()).map(|x| current.get(x, 0)).collect());
            let q_star = lookahead(mdp, &v_star);
            let g_r_star = greedy_policy_masked(&q_star, mdp);
            return Ok(OracleSolution {
                theta,
                v_star,
                q_star,
                g_r_star,
                iterations: iteration,
                residual,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
    })
}

/// `q(x,u) = R(x,u) + λ Σ_x' P(x'|x,u) V(x')`.
pub fn lookahead(mdp: &FiniteMdp, values: &[f64]) -> QTable {
    let lambda = mdp.discount();
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    for x in 0..mdp.n_states() {
        for u in 0..mdp.n_actions() {
            q.set(x, u, mdp.reward(x, u) + lambda * mdp.expected_next(x, u, values));
        }
    }
    q
}

/// Largest observed ratio `‖Jq₁ − Jq₂‖∞ / ‖q₁ − q₂‖∞` over `trials` random
/// pairs with entries in `[-bound, bound]`. Pairs at distance zero are skipped.
pub fn contraction_modulus<R: Rng + ?Sized>(
    mdp: &FiniteMdp,
    baseline: &DeterministicPolicy,
    theta: f64,
    trials: usize,
    rng: &mut R,
) -> Result<f64> {
    if trials == 0 {
        return Err(invalid("contraction_modulus needs at least one trial"));
    }
    let (lo, hi) = mdp.reward_bounds();
    let bound = lo.abs().max(hi.abs()).max(1.0) / (1.0 - mdp.discount());
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let q1 = random_table(mdp, bound, rng);
        let q2 = random_table(mdp, bound, rng);
        worst = worst.max(pair_ratio(mdp, baseline, theta, &q1, &q2)?);
    }
    Ok(worst)
}

/// Contraction ratio for one pair, `0` when `q₁ = q₂`.
pub fn pair_ratio(
    mdp: &FiniteMdp,
    baseline: &DeterministicPolicy,
    theta: f64,
    q1: &QTable,
    q2: &QTable,
) -> Result<f64> {
    let gap = q1.sup_distance(q2);
    if gap == 0.0 {
        return Ok(0.0);
    }
    let j1 = apply_operator(mdp, baseline, theta, q1)?;
    let j2 = apply_operator(mdp, baseline, theta, q2)?;
    Ok(j1.sup_distance(&j2) / gap)
}

fn random_table<R: Rng + ?Sized>(mdp: &FiniteMdp, bound: f64, rng: &mut R) -> QTable {
    let values = (0..mdp.n_states() * mdp.n_actions())
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    QTable::from_flat(mdp.n_states(), mdp.n_actions(), values)
}
