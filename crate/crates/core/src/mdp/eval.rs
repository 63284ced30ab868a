use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{mix_law, DeterministicPolicy, FiniteMdp, MixedLaw, ValueVector};
use crate::error::{invalid, Error, Result};

/// Residual bound for exact evaluation, relative to `max(1, ‖V‖∞)`.
const RESIDUAL_TOLERANCE: f64 = 1e-9;
const REFINEMENT_STEPS: usize = 4;

/// Draws `x' ~ P[x][u][·]` and returns it with the reward `R[x][u]`.
///
/// Consumes exactly one uniform draw from `rng`.
pub fn sample_transition<R: Rng + ?Sized>(mdp: &FiniteMdp, x: usize, u: usize, rng: &mut R) -> Result<(usize, f64)> {
    mdp.check_state(x)?;
    mdp.check_action(u)?;
    let draw: f64 = rng.random();
    let row = mdp.row(x, u);
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (next, &p) in row.iter().enumerate() {
        if p > 0.0 {
            cumulative += p;
            last_positive = next;
            if draw < cumulative {
                return Ok((next, mdp.reward(x, u)));
            }
        }
    }
    // Row sums may fall a hair short of 1.
    Ok((last_positive, mdp.reward(x, u)))
}

/// Result of an exact policy evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub values: ValueVector,
    /// `‖V − (R_law + λ P_law V)‖∞`.
    pub residual: f64,
}

/// Exact value of the mixed law: solves `(I − λ P_law) V = R_law`.
///
/// The reward collected at step `t` (counting from 1) is weighted by `λ^{t−1}`.
pub fn evaluate_law_exact(mdp: &FiniteMdp, law: &MixedLaw) -> Result<ValueVector> {
    evaluate_law_with_residual(mdp, law).map(|e| e.values)
}

/// Exact value of a deterministic policy.
pub fn evaluate_policy_exact(mdp: &FiniteMdp, policy: &DeterministicPolicy) -> Result<ValueVector> {
    let law = mix_law(1.0, policy.clone(), policy.clone())?;
    evaluate_law_exact(mdp, &law)
}

/// Same as [`evaluate_law_exact`] but also reports the fixed-point residual.
pub fn evaluate_law_with_residual(mdp: &FiniteMdp, law: &MixedLaw) -> Result<Evaluation> {
    let n = mdp.n_states();
    if law.n_states() != n {
        return Err(invalid(format!("law covers {} states, MDP has {n}", law.n_states())));
    }
    let lambda = mdp.discount();
    let mut p_law = DMatrix::<f64>::zeros(n, n);
    let mut r_law = DVector::<f64>::zeros(n);
    for x in 0..n {
        for (u, w) in law.distribution(x) {
            mdp.check_action(u)?;
            if w == 0.0 {
                continue;
            }
            r_law[x] += w * mdp.reward(x, u);
            for (next, &p) in mdp.row(x, u).iter().enumerate() {
                p_law[(x, next)] += w * p;
            }
        }
    }
    let system = DMatrix::<f64>::identity(n, n) - &p_law * lambda;
    let lu = system.clone().lu();
    let mut v = lu.solve(&r_law).ok_or(Error::Evaluation {
        residual: f64::INFINITY,
    })?;

    let residual_of = |v: &DVector<f64>| -> f64 { (&r_law - &system * v).amax() };
    let scale = |v: &DVector<f64>| -> f64 { v.amax().max(1.0) };

    let mut residual = residual_of(&v);
    for _ in 0..REFINEMENT_STEPS {
        if residual <= RESIDUAL_TOLERANCE * scale(&v) * 1e-3 {
            break;
        }
        let correction = match lu.solve(&(&r_law - &system * &v)) {
            Some(c) => c,
            None => break,
        };
        let candidate = &v + correction;
        let candidate_residual = residual_of(&candidate);
        if candidate_residual >= residual {
            break;
        }
        v = candidate;
        residual = candidate_residual;
    }
    if !(residual <= RESIDUAL_TOLERANCE * scale(&v)) {
        return Err(Error::Evaluation { residual });
    }
    Ok(Evaluation {
        values: ValueVector(v.iter().copied().collect()),
        residual,
    })
}

/// Discounted return of one simulated trajectory of length `horizon` from `x0`.
pub fn rollout_return<R: Rng + ?Sized>(
    mdp: &FiniteMdp,
    law: &MixedLaw,
    x0: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<f64> {
    mdp.check_state(x0)?;
    if horizon == 0 {
        return Err(invalid("rollout horizon must be at least 1"));
    }
    if law.n_states() != mdp.n_states() {
        return Err(invalid("law and MDP disagree on the number of states"));
    }
    let lambda = mdp.discount();
    let mut weight = 1.0;
    let mut total = 0.0;
    let mut x = x0;
    for _ in 0..horizon {
        let u = law.sample(x, rng);
        let (next, r) = sample_transition(mdp, x, u, rng)?;
        total += weight * r;
        weight *= lambda;
        x = next;
    }
    Ok(total)
}
