use std::fmt;
use std::str::FromStr;

use adherence_core::envs::Environment;
use adherence_core::{AlphaSchedule, EpsilonSchedule, LearnerConfig, LearnerMode};
use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    AdherenceAware,
    ClassicalQ,
    BaselineOnly,
}

impl Approach {
    pub const ALL: [Approach; 3] = [Approach::AdherenceAware, Approach::ClassicalQ, Approach::BaselineOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Approach::AdherenceAware => "adherence_aware",
            Approach::ClassicalQ => "classical_q",
            Approach::BaselineOnly => "baseline_only",
        }
    }

    pub fn learner_mode(self) -> Option<LearnerMode> {
        match self {
            Approach::AdherenceAware => Some(LearnerMode::AdherenceAware),
            Approach::ClassicalQ => Some(LearnerMode::Classical),
            Approach::BaselineOnly => None,
        }
    }
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Approach {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "adherence_aware" | "aa" => Ok(Approach::AdherenceAware),
            "classical_q" | "classical" => Ok(Approach::ClassicalQ),
            "baseline_only" | "baseline" => Ok(Approach::BaselineOnly),
            other => bail!("unknown approach {other:?}"),
        }
    }
}

/// Learner hyperparameters shared by every learning approach in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSettings {
    pub alpha: AlphaSchedule,
    pub epsilon: EpsilonSchedule,
    pub initial_q: f64,
    pub prior: f64,
}

impl Default for LearnerSettings {
    fn default() -> Self {
        LearnerSettings {
            alpha: AlphaSchedule::Polynomial { omega: 0.85 },
            epsilon: EpsilonSchedule::Constant { epsilon: 0.1 },
            initial_q: 0.0,
            prior: 0.5,
        }
    }
}

impl LearnerSettings {
    /// Constant α = 0.9, ε = 0.1.
    pub fn paper() -> Self {
        LearnerSettings {
            alpha: AlphaSchedule::Constant { alpha: 0.9 },
            ..Self::default()
        }
    }

    pub fn learner_config(&self, mode: LearnerMode, env: &Environment) -> LearnerConfig {
        let mut config = LearnerConfig::new(mode, env.mdp.discount(), env.baseline.clone());
        config.alpha = self.alpha;
        config.epsilon = self.epsilon;
        config.initial_q = self.initial_q;
        config.prior = self.prior;
        config
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Preset name or path to an MDP document.
    pub env: String,
    pub theta_true: f64,
    /// Sweep grid; `None` outside sweeps.
    pub theta_grid: Option<Vec<f64>>,
    pub approaches: Vec<Approach>,
    /// Training steps per learner.
    pub steps: usize,
    /// Monte Carlo rollouts per evaluated law.
    pub episodes: usize,
    pub rollout_horizon: usize,
    pub seeds: Vec<u64>,
    pub learner: LearnerSettings,
    /// `None` means every `max(1, steps / 1000)` steps.
    pub log_every: Option<usize>,
    pub oracle_tol: f64,
    pub bootstrap_resamples: usize,
    /// Record real wall-clock time; otherwise `wall_ms` is written as 0.
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: "machine_replacement".into(),
            theta_true: 0.7,
            theta_grid: None,
            approaches: Approach::ALL.to_vec(),
            steps: 10_000,
            episodes: 100,
            rollout_horizon: 200,
            seeds: (0..20).collect(),
            learner: LearnerSettings::default(),
            log_every: None,
            oracle_tol: 1e-9,
            bootstrap_resamples: 10_000,
            timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(!self.approaches.is_empty(), "at least one approach is required");
        ensure!(!self.seeds.is_empty(), "at least one seed is required");
        ensure!(self.steps > 0, "steps must be positive");
        ensure!(self.rollout_horizon > 0, "rollout horizon must be positive");
        ensure!((0.0..=1.0).contains(&self.theta_true), "theta must lie in [0, 1]");
        if let Some(grid) = &self.theta_grid {
            ensure!(grid.len() >= 2, "a sweep grid needs at least two values");
            ensure!(
                grid.iter().all(|t| (0.0..=1.0).contains(t)),
                "grid values must lie in [0, 1]"
            );
        }
        ensure!(self.oracle_tol > 0.0, "oracle tolerance must be positive");
        Ok(())
    }

    pub fn log_interval(&self) -> usize {
        self.log_every.unwrap_or((self.steps / 1000).max(1)).max(1)
    }

    pub fn environment(&self) -> Result<Environment> {
        Environment::resolve(&self.env).with_context(|| format!("loading environment {:?}", self.env))
    }

    pub fn satisfies_step_size_conditions(&self) -> bool {
        self.learner.alpha.satisfies_step_size_conditions()
    }
}

/// Seeds as a count (`20`), a range (`5..10`) or a list (`1,4,9`).
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        ensure!(a < b, "empty seed range {text:?}");
        return Ok((a..b).collect());
    }
    if text.contains(',') {
        return text
            .split(',')
            .map(|s| s.trim().parse::<u64>().with_context(|| format!("bad seed {s:?}")))
            .collect();
    }
    let n: u64 = text.parse().with_context(|| format!("bad seed count {text:?}"))?;
    ensure!(n > 0, "seed count must be positive");
    Ok((0..n).collect())
}

/// Grid as `start:stop:step` or a comma list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let (start, stop, step): (f64, f64, f64) = (
            parts[0].trim().parse()?,
            parts[1].trim().parse()?,
            parts[2].trim().parse()?,
        );
        ensure!(step > 0.0 && stop >= start, "bad grid {text:?}");
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        // Rounded to 12 decimals so 0.1 steps land on 0.3 rather than 0.30000000000000004.
        return Ok((0..=count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect());
    }
    text.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad grid value {s:?}")))
        .collect()
}

pub fn parse_approaches(text: &str) -> Result<Vec<Approach>> {
    let mut out: Vec<Approach> = text.split(',').map(str::parse).collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}
