//! Seeded experiment drivers.
//!
//! Every run derives three independent ChaCha8 streams from its seed: stream 0
//! drives the learner and the environment, stream 1 the simulated decision
//! maker and stream 2 the evaluation rollouts. Streams depend on the seed
//! alone, so approaches sharing a seed face common random numbers.

use std::time::Instant;

use adherence_core::envs::Environment;
use adherence_core::mdp::{evaluate_law_exact, evaluate_policy_exact, greedy_policy_masked};
use adherence_core::oracle::value_iteration;
use adherence_core::{mix_law, rollout_return, run_steps, LearnerMode, LearnerState, OracleSolution, SimulatedHdm};
use anyhow::{Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Approach, ExperimentConfig};
use crate::record::{RunRecord, ORACLE_LABEL};
use crate::stats::{mean, paired_bootstrap, std_error, Interval};

const LEARNER_STREAM: u64 = 0;
const HDM_STREAM: u64 = 1;
const ROLLOUT_STREAM: u64 = 2;
const ORACLE_MAX_ITER: usize = 1_000_000;
const BOOTSTRAP_SEED: u64 = 0x5eed;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Trains one learner for `config.steps` steps against a simulated decision
/// maker with adherence `theta_true`, calling `observer(step, state, reward)`
/// after every step.
pub fn train<F>(
    config: &ExperimentConfig,
    env: &Environment,
    mode: LearnerMode,
    theta_true: f64,
    seed: u64,
    mut observer: F,
) -> Result<LearnerState>
where
    F: FnMut(u64, &LearnerState, f64),
{
    let mut state = LearnerState::new(&env.mdp, config.learner.learner_config(mode, env))?;
    let mut rng = stream(seed, LEARNER_STREAM);
    let mut hdm = SimulatedHdm::new(theta_true, stream(seed, HDM_STREAM))?;
    run_steps(
        &mut state,
        &env.mdp,
        &mut hdm,
        env.initial_state,
        config.steps,
        &mut rng,
        |s, t| observer(s.step(), s, t.reward),
    )?;
    Ok(state)
}

fn solve_oracle(env: &Environment, theta: f64, tol: f64, warnings: &mut Vec<String>) -> Option<OracleSolution> {
    match value_iteration(&env.mdp, &env.baseline, theta, tol, ORACLE_MAX_ITER) {
        Ok(solution) => Some(solution),
        Err(e) => {
            warnings.push(format!("oracle at theta {theta}: {e}"));
            None
        }
    }
}

/// Exact value at the initial state of the optimal actual law at `theta`.
fn oracle_actual_value(env: &Environment, solution: &OracleSolution, theta: f64) -> Result<f64> {
    let law = mix_law(theta, solution.g_r_star.clone(), env.baseline.clone())?;
    Ok(evaluate_law_exact(&env.mdp, &law)?[env.initial_state])
}

fn elapsed_ms(config: &ExperimentConfig, start: Instant) -> u64 {
    if config.timing {
        start.elapsed().as_millis() as u64
    } else {
        0
    }
}

fn approach_rank(label: &str) -> usize {
    Approach::ALL
        .iter()
        .position(|a| a.as_str() == label)
        .unwrap_or(Approach::ALL.len())
}

fn sort_records(records: &mut [RunRecord]) {
    records.sort_by(|a, b| {
        a.theta_true
            .total_cmp(&b.theta_true)
            .then(a.seed.cmp(&b.seed))
            .then(approach_rank(&a.approach).cmp(&approach_rank(&b.approach)))
            .then(a.step.cmp(&b.step))
    });
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub env: String,
    pub theta_true: f64,
    pub steps: usize,
    pub log_interval: usize,
    pub oracle_value: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Output<S> {
    pub records: Vec<RunRecord>,
    pub summary: S,
}

/// Traces the θ̂-mixed initial-state value of each learner.
pub fn run_convergence(config: &ExperimentConfig) -> Result<Output<ConvergenceSummary>> {
    config.validate()?;
    let env = config.environment()?;
    let theta = config.theta_true;
    let interval = config.log_interval() as u64;
    let mut warnings = Vec::new();
    let oracle = solve_oracle(&env, theta, config.oracle_tol, &mut warnings);
    let oracle_value = oracle.as_ref().map(|o| o.v_star[env.initial_state]);
    let baseline_value = evaluate_policy_exact(&env.mdp, &env.baseline)?[env.initial_state];

    let jobs: Vec<(u64, Approach)> = config
        .seeds
        .iter()
        .flat_map(|&s| config.approaches.iter().map(move |&a| (s, a)))
        .collect();
    let per_job: Vec<Vec<RunRecord>> = jobs
        .par_iter()
        .map(|&(seed, approach)| -> Result<Vec<RunRecord>> {
            let start = Instant::now();
            let Some(mode) = approach.learner_mode() else {
                return Ok(vec![RunRecord {
                    seed,
                    approach: approach.to_string(),
                    theta_true: theta,
                    step: config.steps as u64,
                    tracked_value: baseline_value,
                    actual_return: baseline_value,
                    theta_hat: None,
                    wall_ms: elapsed_ms(config, start),
                }]);
            };
            let lambda = env.mdp.discount();
            let mut rows = Vec::new();
            let mut weight = 1.0;
            let mut discounted = 0.0;
            train(config, &env, mode, theta, seed, |step, state, reward| {
                discounted += weight * reward;
                weight *= lambda;
                if step % interval == 0 || step == config.steps as u64 {
                    rows.push(RunRecord {
                        seed,
                        approach: approach.to_string(),
                        theta_true: theta,
                        step,
                        tracked_value: state.mixed_value(env.initial_state),
                        actual_return: discounted,
                        theta_hat: Some(state.adherence().theta_hat()),
                        wall_ms: elapsed_ms(config, start),
                    });
                }
            })
            .with_context(|| format!("seed {seed}, {approach}"))?;
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let mut records: Vec<RunRecord> = per_job.into_iter().flatten().collect();
    if let Some(v) = oracle_value {
        records.extend(config.seeds.iter().map(|&seed| RunRecord {
            seed,
            approach: ORACLE_LABEL.into(),
            theta_true: theta,
            step: config.steps as u64,
            tracked_value: v,
            actual_return: v,
            theta_hat: None,
            wall_ms: 0,
        }));
    }
    sort_records(&mut records);
    Ok(Output {
        records,
        summary: ConvergenceSummary {
            env: env.name.clone(),
            theta_true: theta,
            steps: config.steps,
            log_interval: interval as usize,
            oracle_value,
            warnings,
        },
    })
}

/// Result of training and evaluating one approach on one seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Outcome {
    pub seed: u64,
    pub approach: Approach,
    /// Exact value at the initial state of the actual law.
    pub exact_value: f64,
    /// Mean discounted rollout return of the actual law.
    pub rollout_mean: f64,
    pub tracked_value: f64,
    pub theta_hat: Option<f64>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproachStats {
    pub approach: Approach,
    pub mean_exact: f64,
    pub std_error_exact: f64,
    pub mean_rollout: f64,
    pub std_error_rollout: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairedDifference {
    pub better: Approach,
    pub worse: Approach,
    /// 95% paired bootstrap interval for the mean exact-value difference.
    pub interval: Interval,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub env: String,
    pub theta_true: f64,
    pub steps: usize,
    pub baseline_value: f64,
    /// Optimal actual-law value at `theta_true`.
    pub oracle_value: Option<f64>,
    /// Optimal value with full adherence.
    pub unconstrained_value: Option<f64>,
    pub approaches: Vec<ApproachStats>,
    pub differences: Vec<PairedDifference>,
    pub outcomes: Vec<Outcome>,
    pub warnings: Vec<String>,
}

impl ComparisonSummary {
    pub fn stats(&self, approach: Approach) -> Option<&ApproachStats> {
        self.approaches.iter().find(|s| s.approach == approach)
    }

    pub fn difference(&self, better: Approach, worse: Approach) -> Option<&PairedDifference> {
        self.differences.iter().find(|d| d.better == better && d.worse == worse)
    }

    pub fn exact_values(&self, approach: Approach) -> Vec<f64> {
        self.outcomes
            .iter()
            .filter(|o| o.approach == approach)
            .map(|o| o.exact_value)
            .collect()
    }
}

fn evaluate_outcome(config: &ExperimentConfig, env: &Environment, approach: Approach, seed: u64) -> Result<Outcome> {
    let start = Instant::now();
    let theta = config.theta_true;
    let (law, tracked_value, theta_hat) = match approach.learner_mode() {
        Some(mode) => {
            let state = train(config, env, mode, theta, seed, |_, _, _| {})?;
            let greedy = greedy_policy_masked(state.q(), &env.mdp);
            let law = mix_law(theta, greedy, env.baseline.clone())?;
            (
                law,
                state.mixed_value(env.initial_state),
                Some(state.adherence().theta_hat()),
            )
        }
        None => {
            let law = mix_law(0.0, env.baseline.clone(), env.baseline.clone())?;
            let v = evaluate_law_exact(&env.mdp, &law)?[env.initial_state];
            (law, v, None)
        }
    };
    let exact_value = evaluate_law_exact(&env.mdp, &law)?[env.initial_state];
    let mut rng = stream(seed, ROLLOUT_STREAM);
    let returns = (0..config.episodes)
        .map(|_| rollout_return(&env.mdp, &law, env.initial_state, config.rollout_horizon, &mut rng))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(Outcome {
        seed,
        approach,
        exact_value,
        rollout_mean: if returns.is_empty() {
            exact_value
        } else {
            mean(&returns)
        },
        tracked_value,
        theta_hat,
        wall_ms: elapsed_ms(config, start),
    })
}

/// Trains every approach on every seed, then evaluates the actual law each
/// one induces: greedy recommendation mixed with the baseline at `theta_true`.
pub fn run_comparison(config: &ExperimentConfig) -> Result<Output<ComparisonSummary>> {
    config.validate()?;
    let env = config.environment()?;
    compare_on(config, &env)
}

fn compare_on(config: &ExperimentConfig, env: &Environment) -> Result<Output<ComparisonSummary>> {
    let theta = config.theta_true;
    let mut warnings = Vec::new();
    let oracle = solve_oracle(env, theta, config.oracle_tol, &mut warnings);
    let oracle_value = oracle
        .as_ref()
        .map(|o| oracle_actual_value(env, o, theta))
        .transpose()?;
    let unconstrained_value = if theta == 1.0 {
        oracle_value
    } else {
        solve_oracle(env, 1.0, config.oracle_tol, &mut warnings).map(|o| o.v_star[env.initial_state])
    };
    let baseline_value = evaluate_policy_exact(&env.mdp, &env.baseline)?[env.initial_state];

    let jobs: Vec<(u64, Approach)> = config
        .seeds
        .iter()
        .flat_map(|&s| config.approaches.iter().map(move |&a| (s, a)))
        .collect();
    let mut outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|&(seed, approach)| {
            evaluate_outcome(config, env, approach, seed).with_context(|| format!("seed {seed}, {approach}"))
        })
        .collect::<Result<_>>()?;
    outcomes.sort_by(|a, b| a.seed.cmp(&b.seed).then(a.approach.cmp(&b.approach)));

    let approaches: Vec<ApproachStats> = config
        .approaches
        .iter()
        .map(|&approach| {
            let exact: Vec<f64> = outcomes
                .iter()
                .filter(|o| o.approach == approach)
                .map(|o| o.exact_value)
                .collect();
            let rollout: Vec<f64> = outcomes
                .iter()
                .filter(|o| o.approach == approach)
                .map(|o| o.rollout_mean)
                .collect();
            ApproachStats {
                approach,
                mean_exact: mean(&exact),
                std_error_exact: std_error(&exact),
                mean_rollout: mean(&rollout),
                std_error_rollout: std_error(&rollout),
            }
        })
        .collect();

    let mut differences = Vec::new();
    for (i, &better) in config.approaches.iter().enumerate() {
        for &worse in &config.approaches[i + 1..] {
            let value = |a: Approach| -> Vec<f64> {
                outcomes
                    .iter()
                    .filter(|o| o.approach == a)
                    .map(|o| o.exact_value)
                    .collect()
            };
            differences.push(PairedDifference {
                better,
                worse,
                interval: paired_bootstrap(
                    &value(better),
                    &value(worse),
                    config.bootstrap_resamples,
                    0.025,
                    BOOTSTRAP_SEED,
                ),
            });
        }
    }

    let mut records: Vec<RunRecord> = outcomes
        .iter()
        .map(|o| RunRecord {
            seed: o.seed,
            approach: o.approach.to_string(),
            theta_true: theta,
            step: config.steps as u64,
            tracked_value: o.tracked_value,
            actual_return: o.exact_value,
            theta_hat: o.theta_hat,
            wall_ms: o.wall_ms,
        })
        .collect();
    if let Some(v) = oracle_value {
        records.extend(config.seeds.iter().map(|&seed| RunRecord {
            seed,
            approach: ORACLE_LABEL.into(),
            theta_true: theta,
            step: config.steps as u64,
            tracked_value: oracle.as_ref().map_or(v, |o| o.v_star[env.initial_state]),
            actual_return: v,
            theta_hat: None,
            wall_ms: 0,
        }));
    }
    sort_records(&mut records);

    Ok(Output {
        records,
        summary: ComparisonSummary {
            env: env.name.clone(),
            theta_true: theta,
            steps: config.steps,
            baseline_value,
            oracle_value,
            unconstrained_value,
            approaches,
            differences,
            outcomes,
            warnings,
        },
    })
}

/// [`run_comparison`] at every grid value.
pub fn run_theta_sweep(config: &ExperimentConfig) -> Result<Output<Vec<ComparisonSummary>>> {
    config.validate()?;
    let grid = config.theta_grid.clone().context("a sweep needs a theta grid")?;
    let env = config.environment()?;
    let parts: Vec<Output<ComparisonSummary>> = grid
        .par_iter()
        .map(|&theta| {
            let at = ExperimentConfig {
                theta_true: theta,
                ..config.clone()
            };
            compare_on(&at, &env)
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for part in parts {
        records.extend(part.records);
        summaries.push(part.summary);
    }
    sort_records(&mut records);
    Ok(Output {
        records,
        summary: summaries,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleReport {
    pub env: String,
    pub theta: f64,
    pub initial_state: usize,
    pub iterations: usize,
    pub residual: f64,
    pub v_star: Vec<f64>,
    pub recommendation: Vec<String>,
    pub baseline: Vec<String>,
    /// Exact initial-state values of the baseline law, the optimal actual law
    /// and the full-adherence optimum.
    pub baseline_value: f64,
    pub oracle_value: f64,
    pub unconstrained_value: f64,
}

pub fn oracle_report(env: &Environment, theta: f64, tol: f64) -> Result<OracleReport> {
    let solution = value_iteration(&env.mdp, &env.baseline, theta, tol, ORACLE_MAX_ITER)?;
    let full = value_iteration(&env.mdp, &env.baseline, 1.0, tol, ORACLE_MAX_ITER)?;
    let label = |u: usize| env.mdp.action_label(u);
    Ok(OracleReport {
        env: env.name.clone(),
        theta,
        initial_state: env.initial_state,
        iterations: solution.iterations,
        residual: solution.residual,
        v_star: solution.v_star.0.clone(),
        recommendation: solution.g_r_star.actions().iter().map(|&u| label(u)).collect(),
        baseline: env.baseline.actions().iter().map(|&u| label(u)).collect(),
        baseline_value: evaluate_policy_exact(&env.mdp, &env.baseline)?[env.initial_state],
        oracle_value: oracle_actual_value(env, &solution, theta)?,
        unconstrained_value: full.v_star[env.initial_state],
    })
}
