//! Adherence-aware tabular Q-learning.
//!
//! Each step the learner recommends `u_r` (ε-greedy on `Q`), the decision
//! maker implements either `u_r` or its baseline action, the environment
//! transitions, the adherence estimate absorbs the observation and then the
//! implemented cell is backed up towards
//!
//! ```text
//! r + λ · (θ̂ · max_u' Q(x',u') + (1 − θ̂) · Q(x', g_b(x')))
//! ```
//!
//! using the post-observation estimate `θ̂`. Classical mode backs up towards
//! `r + λ · max_u' Q(x',u')`.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adherence::{classify_action, AdherenceEstimate, AdherenceObservation, DEFAULT_PRIOR};
use crate::error::{invalid, Error, Result};
use crate::mdp::{greedy_policy_masked, sample_transition, DeterministicPolicy, FiniteMdp, QTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerMode {
    AdherenceAware,
    Classical,
}

/// Learning-rate schedule, indexed by the visit count of the updated cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaSchedule {
    /// Fixed step size in (0, 1]. Square-summable only if it is zero, so it
    /// does not meet the stochastic-approximation step-size conditions.
    Constant { alpha: f64 },
    /// `1 / (1 + visits)^ω`, ω ∈ (0.5, 1].
    Polynomial { omega: f64 },
}

impl AlphaSchedule {
    pub fn rate(&self, visits: u64) -> f64 {
        match *self {
            AlphaSchedule::Constant { alpha } => alpha,
            AlphaSchedule::Polynomial { omega } => (1.0 + visits as f64).powf(-omega),
        }
    }

    /// Whether `Σ α = ∞` and `Σ α² < ∞` hold along every cell's visits.
    pub fn satisfies_step_size_conditions(&self) -> bool {
        matches!(self, AlphaSchedule::Polynomial { omega } if *omega > 0.5 && *omega <= 1.0)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            AlphaSchedule::Constant { alpha } if !(alpha > 0.0 && alpha <= 1.0) => Err(invalid(format!(
                "constant learning rate must lie in (0, 1], got {alpha}"
            ))),
            AlphaSchedule::Polynomial { omega } if !(omega > 0.5 && omega <= 1.0) => Err(invalid(format!(
                "polynomial exponent must lie in (0.5, 1], got {omega}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsilonSchedule {
    Constant {
        epsilon: f64,
    },
    /// `initial / (1 + step / scale)`.
    Decaying {
        initial: f64,
        scale: f64,
    },
}

impl EpsilonSchedule {
    pub fn at(&self, step: u64) -> f64 {
        match *self {
            EpsilonSchedule::Constant { epsilon } => epsilon,
            EpsilonSchedule::Decaying { initial, scale } => initial / (1.0 + step as f64 / scale),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            EpsilonSchedule::Constant { epsilon } => (0.0..=1.0).contains(&epsilon),
            EpsilonSchedule::Decaying { initial, scale } => (0.0..=1.0).contains(&initial) && scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid exploration schedule {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub mode: LearnerMode,
    pub alpha: AlphaSchedule,
    pub epsilon: EpsilonSchedule,
    pub discount: f64,
    pub baseline: DeterministicPolicy,
    #[serde(default)]
    pub initial_q: f64,
    #[serde(default = "default_prior")]
    pub prior: f64,
    /// Uses this value in place of the running estimate in the backup.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned_theta: Option<f64>,
}

fn default_prior() -> f64 {
    DEFAULT_PRIOR
}

impl LearnerConfig {
    /// Polynomial α (ω = 0.85), constant ε = 0.1.
    pub fn new(mode: LearnerMode, discount: f64, baseline: DeterministicPolicy) -> Self {
        LearnerConfig {
            mode,
            alpha: AlphaSchedule::Polynomial { omega: 0.85 },
            epsilon: EpsilonSchedule::Constant { epsilon: 0.1 },
            discount,
            baseline,
            initial_q: 0.0,
            prior: DEFAULT_PRIOR,
            pinned_theta: None,
        }
    }

    /// Constant α = 0.9, constant ε = 0.1.
    pub fn paper_preset(mode: LearnerMode, discount: f64, baseline: DeterministicPolicy) -> Self {
        LearnerConfig {
            alpha: AlphaSchedule::Constant { alpha: 0.9 },
            ..Self::new(mode, discount, baseline)
        }
    }

    pub fn satisfies_step_size_conditions(&self) -> bool {
        self.alpha.satisfies_step_size_conditions()
    }

    pub fn validate(&self, mdp: &FiniteMdp) -> Result<()> {
        self.alpha.validate()?;
        self.epsilon.validate()?;
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(invalid(format!("discount must lie in (0, 1), got {}", self.discount)));
        }
        if !self.initial_q.is_finite() {
            return Err(invalid("initial Q value must be finite"));
        }
        if !(0.0..=1.0).contains(&self.prior) {
            return Err(invalid("adherence prior must lie in [0, 1]"));
        }
        if let Some(t) = self.pinned_theta {
            if !(0.0..=1.0).contains(&t) {
                return Err(invalid("pinned adherence must lie in [0, 1]"));
            }
        }
        self.baseline.validate_for(mdp)
    }

    /// SHA-256 over the canonical JSON encoding, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// One resolved step of the recommendation loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub x: usize,
    pub recommended: usize,
    pub baseline: usize,
    pub implemented: usize,
    pub reward: f64,
    pub next: usize,
    pub observation: AdherenceObservation,
}

/// Change applied to one Q cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QUpdate {
    pub x: usize,
    pub u: usize,
    pub before: f64,
    pub after: f64,
    pub target: f64,
    pub alpha: f64,
    /// Adherence level used in the backup.
    pub theta: f64,
}

/// The learner's mutable state. Owned by exactly one session.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub(crate) q: QTable,
    pub(crate) adherence: AdherenceEstimate,
    pub(crate) visit_counts: Vec<u64>,
    pub(crate) config: LearnerConfig,
    pub(crate) step: u64,
    admissible: Vec<Vec<usize>>,
}

impl LearnerState {
    pub fn new(mdp: &FiniteMdp, config: LearnerConfig) -> Result<Self> {
        config.validate(mdp)?;
        let (n, m) = (mdp.n_states(), mdp.n_actions());
        Ok(LearnerState {
            q: QTable::new(n, m, config.initial_q),
            adherence: AdherenceEstimate::with_prior(config.prior)?,
            visit_counts: vec![0; n * m],
            step: 0,
            admissible: mdp.admissible_sets().to_vec(),
            config,
        })
    }

    pub fn q(&self) -> &QTable {
        &self.q
    }

    pub fn adherence(&self) -> &AdherenceEstimate {
        &self.adherence
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn visits(&self, x: usize, u: usize) -> u64 {
        self.visit_counts[x * self.q.n_actions() + u]
    }

    pub fn visit_counts(&self) -> &[u64] {
        &self.visit_counts
    }

    pub fn baseline_action(&self, x: usize) -> usize {
        self.config.baseline.action(x)
    }

    /// Adherence level used in the backup: the pinned value if any.
    pub fn theta_in_use(&self) -> f64 {
        self.config.pinned_theta.unwrap_or_else(|| self.adherence.theta_hat())
    }

    pub fn epsilon(&self) -> f64 {
        self.config.epsilon.at(self.step)
    }

    pub fn alpha_for(&self, x: usize, u: usize) -> f64 {
        self.config.alpha.rate(self.visits(x, u))
    }

    /// Greedy recommendation law over admissible actions.
    pub fn greedy_policy(&self) -> DeterministicPolicy {
        DeterministicPolicy::new(
            (0..self.q.n_states())
                .map(|x| self.q.best_among(x, &self.admissible[x]).0)
                .collect(),
        )
    }

    /// `θ̂ · max_u Q(x,u) + (1 − θ̂) · Q(x, g_b(x))`.
    pub fn mixed_value(&self, x: usize) -> f64 {
        let theta = self.theta_in_use();
        let (_, best) = self.q.best_among(x, &self.admissible[x]);
        theta * best + (1.0 - theta) * self.q.get(x, self.baseline_action(x))
    }

    /// ε-greedy recommendation. Consumes one uniform draw, plus one more when
    /// exploring.
    pub fn recommend<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> Result<usize> {
        let actions = self
            .admissible
            .get(x)
            .ok_or_else(|| invalid(format!("state {x} out of range")))?;
        if actions.is_empty() {
            return Err(Error::NoAdmissibleAction(x));
        }
        let explore: f64 = rng.random();
        if explore < self.epsilon() {
            Ok(actions[rng.random_range(0..actions.len())])
        } else {
            Ok(self.q.best_among(x, actions).0)
        }
    }

    /// Backup target for a transition into `next` with reward `r`, using
    /// adherence level `theta` (ignored in classical mode).
    pub fn target(&self, r: f64, next: usize, theta: f64) -> f64 {
        let (_, best) = self.q.best_among(next, &self.admissible[next]);
        let lambda = self.config.discount;
        match self.config.mode {
            LearnerMode::Classical => r + lambda * best,
            LearnerMode::AdherenceAware => {
                let on_baseline = self.q.get(next, self.baseline_action(next));
                r + lambda * (theta * best + (1.0 - theta) * on_baseline)
            }
        }
    }

    /// Records the adherence observation, then backs up `Q(x, u)` where `u`
    /// is the implemented action.
    pub fn update(&mut self, x: usize, u: usize, r: f64, next: usize, obs: AdherenceObservation) -> Result<QUpdate> {
        let (n, m) = (self.q.n_states(), self.q.n_actions());
        if x >= n || next >= n {
            return Err(invalid(format!(
                "state index out of range ({x} -> {next}, n_states = {n})"
            )));
        }
        if u >= m {
            return Err(invalid(format!("action {u} out of range (n_actions = {m})")));
        }
        if self.admissible[x].binary_search(&u).is_err() {
            return Err(invalid(format!("action {u} is not admissible in state {x}")));
        }
        if !r.is_finite() {
            return Err(invalid(format!("reward must be finite, got {r}")));
        }

        self.adherence.record(obs);
        let theta = self.theta_in_use();
        let target = self.target(r, next, theta);
        let alpha = self.alpha_for(x, u);
        let before = self.q.get(x, u);
        let after = before + alpha * (target - before);
        self.q.set(x, u, after);
        self.visit_counts[x * m + u] += 1;
        self.step += 1;
        Ok(QUpdate {
            x,
            u,
            before,
            after,
            target,
            alpha,
            theta,
        })
    }

    /// Executes the implemented action in `mdp`, classifies it and applies
    /// the update. With `lenient`, actions outside `{u_r, u_b}` are treated
    /// as uninformative instead of being rejected.
    pub fn resolve<R: Rng + ?Sized>(
        &mut self,
        mdp: &FiniteMdp,
        x: usize,
        recommended: usize,
        implemented: usize,
        lenient: bool,
        rng: &mut R,
    ) -> Result<(Transition, QUpdate)> {
        let baseline = self.baseline_action(x);
        let observation = match classify_action(implemented, recommended, baseline) {
            Ok(obs) => obs,
            Err(Error::ProtocolViolation { .. }) if lenient => AdherenceObservation::Uninformative,
            Err(e) => return Err(e),
        };
        if !mdp.is_admissible(x, implemented) {
            return Err(invalid(format!("action {implemented} is not admissible in state {x}")));
        }
        let (next, reward) = sample_transition(mdp, x, implemented, rng)?;
        let update = self.update(x, implemented, reward, next, observation)?;
        Ok((
            Transition {
                x,
                recommended,
                baseline,
                implemented,
                reward,
                next,
                observation,
            },
            update,
        ))
    }

    /// Restricted to learners built over `mdp`: the sup distance to `target`
    /// over admissible cells.
    pub fn admissible_sup_distance(&self, target: &QTable) -> f64 {
        let mut worst: f64 = 0.0;
        for (x, actions) in self.admissible.iter().enumerate() {
            for &u in actions {
                worst = worst.max((self.q.get(x, u) - target.get(x, u)).abs());
            }
        }
        worst
    }

    pub fn greedy_policy_for(&self, mdp: &FiniteMdp) -> DeterministicPolicy {
        greedy_policy_masked(&self.q, mdp)
    }
}

/// What the decision maker does with a recommendation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "choice", content = "action")]
pub enum HdmChoice {
    Adhere,
    Baseline,
    Action(usize),
}

impl HdmChoice {
    pub fn resolve(self, recommended: usize, baseline: usize) -> usize {
        match self {
            HdmChoice::Adhere => recommended,
            HdmChoice::Baseline => baseline,
            HdmChoice::Action(u) => u,
        }
    }
}

/// A decision maker facing one recommendation at a time.
pub trait DecisionMaker {
    fn choose(&mut self, x: usize, recommended: usize, baseline: usize) -> HdmChoice;
}

/// Implements the recommendation with probability `theta_true`, the baseline
/// otherwise. Draws from its own random stream.
#[derive(Debug, Clone)]
pub struct SimulatedHdm<R> {
    theta_true: f64,
    rng: R,
}

impl<R: Rng> SimulatedHdm<R> {
    pub fn new(theta_true: f64, rng: R) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta_true) {
            return Err(invalid(format!("adherence level must lie in [0, 1], got {theta_true}")));
        }
        Ok(SimulatedHdm { theta_true, rng })
    }

    pub fn theta_true(&self) -> f64 {
        self.theta_true
    }
}

impl<R: Rng> DecisionMaker for SimulatedHdm<R> {
    fn choose(&mut self, _x: usize, _recommended: usize, _baseline: usize) -> HdmChoice {
        let draw: f64 = self.rng.random();
        if draw < self.theta_true {
            HdmChoice::Adhere
        } else {
            HdmChoice::Baseline
        }
    }
}

/// Replays a fixed list of choices, then keeps adhering.
#[derive(Debug, Clone, Default)]
pub struct ScriptedHdm {
    choices: Vec<HdmChoice>,
    cursor: usize,
}

impl ScriptedHdm {
    pub fn new(choices: Vec<HdmChoice>) -> Self {
        ScriptedHdm { choices, cursor: 0 }
    }
}

impl DecisionMaker for ScriptedHdm {
    fn choose(&mut self, _x: usize, _recommended: usize, _baseline: usize) -> HdmChoice {
        let choice = self.choices.get(self.cursor).copied().unwrap_or(HdmChoice::Adhere);
        self.cursor += 1;
        choice
    }
}

/// Runs `steps` iterations of recommend → implement → transition → update
/// starting from `x0`, calling `observer` after each step.
pub fn run_steps<R, H, F>(
    state: &mut LearnerState,
    mdp: &FiniteMdp,
    hdm: &mut H,
    x0: usize,
    steps: usize,
    rng: &mut R,
    mut observer: F,
) -> Result<usize>
where
    R: Rng + ?Sized,
    H: DecisionMaker + ?Sized,
    F: FnMut(&LearnerState, &Transition),
{
    if steps == 0 {
        return Err(invalid("an episode needs at least one step"));
    }
    mdp.check_state(x0)?;
    if state.q.n_states() != mdp.n_states() || state.q.n_actions() != mdp.n_actions() {
        return Err(invalid("learner and MDP dimensions differ"));
    }
    let mut x = x0;
    for _ in 0..steps {
        let recommended = state.recommend(x, rng)?;
        let baseline = state.baseline_action(x);
        let implemented = hdm.choose(x, recommended, baseline).resolve(recommended, baseline);
        let (transition, _) = state.resolve(mdp, x, recommended, implemented, false, rng)?;
        observer(state, &transition);
        x = transition.next;
    }
    Ok(x)
}

/// [`run_steps`] collecting the trajectory.
pub fn run_episode<R, H>(
    state: &mut LearnerState,
    mdp: &FiniteMdp,
    hdm: &mut H,
    x0: usize,
    steps: usize,
    rng: &mut R,
) -> Result<Vec<Transition>>
where
    R: Rng + ?Sized,
    H: DecisionMaker + ?Sized,
{
    let mut trajectory = Vec::with_capacity(steps);
    run_steps(state, mdp, hdm, x0, steps, rng, |_, t| trajectory.push(*t))?;
    Ok(trajectory)
}
