use std::time::{SystemTime, UNIX_EPOCH};

use adherence_core::envs::{Environment, InventoryParams};
use adherence_core::{
    AdherenceObservation, AlphaSchedule, EpsilonSchedule, HdmChoice, LearnerConfig, LearnerMode, LearnerSnapshot,
    LearnerState, MdpDocument, QUpdate,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

pub const SESSION_FILE_VERSION: u32 = 1;

/// Where a session's environment comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvDescriptor {
    /// `machine_replacement`, `inventory` or `inventory_small`.
    Preset(String),
    /// An uploaded MDP document carrying its own baseline law.
    Mdp(MdpDocument),
}

impl EnvDescriptor {
    pub fn build(&self) -> Result<Environment, ServiceError> {
        match self {
            EnvDescriptor::Preset(name) => match name.as_str() {
                "machine_replacement" | "machine" => Ok(Environment::machine_replacement()),
                "inventory" => Ok(Environment::inventory(&InventoryParams::default())?),
                "inventory_small" | "inventory_40" => Ok(Environment::inventory(&InventoryParams::reduced())?),
                other => Err(ServiceError::BadRequest(format!("unknown preset {other:?}"))),
            },
            EnvDescriptor::Mdp(doc) => Ok(Environment::from_document("uploaded", doc)?),
        }
    }
}

/// Overrides applied to the default learner configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerOptions {
    pub mode: Option<LearnerMode>,
    pub alpha: Option<AlphaSchedule>,
    pub epsilon: Option<EpsilonSchedule>,
    pub initial_q: Option<f64>,
    pub prior: Option<f64>,
}

impl LearnerOptions {
    pub fn config_for(&self, env: &Environment) -> LearnerConfig {
        let mode = self.mode.unwrap_or(LearnerMode::AdherenceAware);
        let mut config = LearnerConfig::new(mode, env.mdp.discount(), env.baseline.clone());
        if let Some(alpha) = self.alpha {
            config.alpha = alpha;
        }
        if let Some(epsilon) = self.epsilon {
            config.epsilon = epsilon;
        }
        if let Some(q) = self.initial_q {
            config.initial_q = q;
        }
        if let Some(prior) = self.prior {
            config.prior = prior;
        }
        config
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub env: EnvDescriptor,
    #[serde(default)]
    pub learner: LearnerOptions,
    #[serde(default)]
    pub seed: u64,
    /// Accept actions outside `{u_r, u_b}`, recording them as uninformative.
    #[serde(default)]
    pub unconstrained_hdm: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActRequest {
    /// Round of the recommendation being answered.
    pub round: u64,
    #[serde(flatten)]
    pub choice: HdmChoice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pending {
    pub round: u64,
    pub recommended: usize,
    pub baseline: usize,
}

/// One completed round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub round: u64,
    pub x: usize,
    pub u_r: usize,
    pub u_b: usize,
    pub u: usize,
    pub observation: AdherenceObservation,
    pub reward: f64,
    pub next: usize,
    pub theta_hat: f64,
    pub adheres: u64,
    pub n: u64,
    pub q_before: f64,
    pub q_after: f64,
}

/// Payload of `GET /sessions/{id}/state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub id: String,
    pub env: String,
    pub round: u64,
    pub step: u64,
    pub x: usize,
    pub x_label: String,
    pub u_r: usize,
    pub u_r_label: String,
    pub u_b: usize,
    pub u_b_label: String,
    /// False when the recommendation equals the baseline action.
    pub informative: bool,
    pub theta_hat: f64,
    pub adheres: u64,
    pub n: u64,
    /// `Q(x, ·)` at the current state.
    pub q_row: Vec<f64>,
    pub action_labels: Vec<String>,
    pub admissible: Vec<usize>,
    pub rewards: Vec<f64>,
    pub initial_state: usize,
    /// θ̂-mixed value estimate of the initial state.
    pub tracked_value: f64,
    pub unconstrained_hdm: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionView {
    pub x: usize,
    pub u_r: usize,
    pub u_b: usize,
    pub u: usize,
    pub reward: f64,
    pub next: usize,
    pub observation: AdherenceObservation,
}

/// Result of `POST /sessions/{id}/act`, also pushed to stream subscribers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDelta {
    pub id: String,
    pub round: u64,
    pub transition: TransitionView,
    pub theta_hat: f64,
    pub adheres: u64,
    pub n: u64,
    pub delta_q: QUpdate,
    pub state: StateView,
}

/// On-disk form of a session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionFile {
    pub version: u32,
    pub id: String,
    pub descriptor: EnvDescriptor,
    pub config: LearnerConfig,
    pub learner: LearnerSnapshot,
    pub seed: u64,
    /// Word position of the session's random stream, in decimal.
    pub rng_word_pos: String,
    pub x: usize,
    pub pending: Pending,
    pub history: Vec<HistoryRow>,
    pub unconstrained_hdm: bool,
    pub created_ms: u64,
    pub updated_ms: u64,
}

/// A live learning session driven by a human decision maker.
///
/// The random stream is consumed in the same order as
/// [`adherence_core::run_steps`]: one recommendation, then one transition.
#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    descriptor: EnvDescriptor,
    env: Environment,
    learner: LearnerState,
    seed: u64,
    rng: ChaCha8Rng,
    x: usize,
    pending: Pending,
    history: Vec<HistoryRow>,
    unconstrained_hdm: bool,
    created_ms: u64,
    updated_ms: u64,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Session {
    pub fn create(id: String, request: &CreateSession) -> Result<Self, ServiceError> {
        let env = request.env.build()?;
        let config = request.learner.config_for(&env);
        let learner = LearnerState::new(&env.mdp, config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
        let x = env.initial_state;
        let recommended = learner.recommend(x, &mut rng)?;
        let pending = Pending {
            round: 0,
            recommended,
            baseline: learner.baseline_action(x),
        };
        let now = now_ms();
        Ok(Session {
            id,
            descriptor: request.env.clone(),
            env,
            learner,
            seed: request.seed,
            rng,
            x,
            pending,
            history: Vec::new(),
            unconstrained_hdm: request.unconstrained_hdm,
            created_ms: now,
            updated_ms: now,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn learner(&self) -> &LearnerState {
        &self.learner
    }

    pub fn history(&self) -> &[HistoryRow] {
        &self.history
    }

    pub fn pending(&self) -> Pending {
        self.pending
    }

    pub fn updated_ms(&self) -> u64 {
        self.updated_ms
    }

    pub fn view(&self) -> StateView {
        let mdp = &self.env.mdp;
        let Pending {
            round,
            recommended,
            baseline,
        } = self.pending;
        let est = self.learner.adherence();
        StateView {
            id: self.id.clone(),
            env: self.env.name.clone(),
            round,
            step: self.learner.step(),
            x: self.x,
            x_label: mdp.state_label(self.x),
            u_r: recommended,
            u_r_label: mdp.action_label(recommended),
            u_b: baseline,
            u_b_label: mdp.action_label(baseline),
            informative: recommended != baseline,
            theta_hat: est.theta_hat(),
            adheres: est.adheres(),
            n: est.n(),
            q_row: self.learner.q().row(self.x).to_vec(),
            action_labels: (0..mdp.n_actions()).map(|u| mdp.action_label(u)).collect(),
            admissible: mdp.admissible(self.x).to_vec(),
            rewards: self.history.iter().map(|h| h.reward).collect(),
            initial_state: self.env.initial_state,
            tracked_value: self.learner.mixed_value(self.env.initial_state),
            unconstrained_hdm: self.unconstrained_hdm,
        }
    }

    /// Applies the human's answer to the pending recommendation.
    pub fn act(&mut self, request: ActRequest) -> Result<StepDelta, ServiceError> {
        let Pending {
            round,
            recommended,
            baseline,
        } = self.pending;
        if request.round != round {
            return Err(ServiceError::StaleRound {
                expected: round,
                got: request.round,
            });
        }
        let implemented = request.choice.resolve(recommended, baseline);
        if implemented >= self.env.mdp.n_actions() {
            return Err(ServiceError::Rejected(format!("action {implemented} does not exist")));
        }
        let (transition, update) = self.learner.resolve(
            &self.env.mdp,
            self.x,
            recommended,
            implemented,
            self.unconstrained_hdm,
            &mut self.rng,
        )?;
        let est = *self.learner.adherence();
        self.history.push(HistoryRow {
            round,
            x: transition.x,
            u_r: recommended,
            u_b: baseline,
            u: implemented,
            observation: transition.observation,
            reward: transition.reward,
            next: transition.next,
            theta_hat: est.theta_hat(),
            adheres: est.adheres(),
            n: est.n(),
            q_before: update.before,
            q_after: update.after,
        });
        self.x = transition.next;
        let next_recommendation = self.learner.recommend(self.x, &mut self.rng)?;
        self.pending = Pending {
            round: round + 1,
            recommended: next_recommendation,
            baseline: self.learner.baseline_action(self.x),
        };
        self.updated_ms = now_ms().max(self.updated_ms);
        Ok(StepDelta {
            id: self.id.clone(),
            round,
            transition: TransitionView {
                x: transition.x,
                u_r: recommended,
                u_b: baseline,
                u: implemented,
                reward: transition.reward,
                next: transition.next,
                observation: transition.observation,
            },
            theta_hat: est.theta_hat(),
            adheres: est.adheres(),
            n: est.n(),
            delta_q: update,
            state: self.view(),
        })
    }

    pub fn history_csv(&self) -> Result<String, ServiceError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for row in &self.history {
            writer
                .serialize(row)
                .map_err(|e| ServiceError::Internal(e.to_string()))?;
        }
        if self.history.is_empty() {
            writer
                .write_record([
                    "round",
                    "x",
                    "u_r",
                    "u_b",
                    "u",
                    "observation",
                    "reward",
                    "next",
                    "theta_hat",
                    "adheres",
                    "n",
                    "q_before",
                    "q_after",
                ])
                .map_err(|e| ServiceError::Internal(e.to_string()))?;
        }
        let bytes = writer.into_inner().map_err(|e| ServiceError::Internal(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| ServiceError::Internal(e.to_string()))
    }

    pub fn to_file(&self) -> SessionFile {
        SessionFile {
            version: SESSION_FILE_VERSION,
            id: self.id.clone(),
            descriptor: self.descriptor.clone(),
            config: self.learner.config().clone(),
            learner: self.learner.snapshot(),
            seed: self.seed,
            rng_word_pos: self.rng.get_word_pos().to_string(),
            x: self.x,
            pending: self.pending,
            history: self.history.clone(),
            unconstrained_hdm: self.unconstrained_hdm,
            created_ms: self.created_ms,
            updated_ms: self.updated_ms,
        }
    }

    pub fn from_file(file: SessionFile) -> Result<Self, ServiceError> {
        if file.version != SESSION_FILE_VERSION {
            return Err(ServiceError::Internal(format!(
                "unsupported session file version {}",
                file.version
            )));
        }
        let env = file.descriptor.build()?;
        let learner = LearnerState::restore(&env.mdp, file.config, &file.learner)?;
        env.mdp.check_state(file.x)?;
        let mut rng = ChaCha8Rng::seed_from_u64(file.seed);
        let pos: u128 = file
            .rng_word_pos
            .parse()
            .map_err(|_| ServiceError::Internal("bad random stream position".into()))?;
        rng.set_word_pos(pos);
        Ok(Session {
            id: file.id,
            descriptor: file.descriptor,
            env,
            learner,
            seed: file.seed,
            rng,
            x: file.x,
            pending: file.pending,
            history: file.history,
            unconstrained_hdm: file.unconstrained_hdm,
            created_ms: file.created_ms,
            updated_ms: file.updated_ms,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn machine(seed: u64) -> Session {
        let request = CreateSession {
            env: EnvDescriptor::Preset("machine_replacement".into()),
            learner: LearnerOptions::default(),
            seed,
            unconstrained_hdm: false,
        };
        Session::create("s".into(), &request).unwrap()
    }

    #[test]
    fn fresh_session() {
        let s = machine(1);
        let v = s.view();
        assert_eq!((v.x, v.x_label.as_str(), v.round), (0, "1", 0));
        assert_eq!(v.theta_hat, 0.5);
        assert!(v.rewards.is_empty());
        assert_eq!(v.u_b_label, "wait");
    }

    #[test]
    fn stale_round_is_rejected_without_side_effects() {
        let mut s = machine(2);
        s.act(ActRequest {
            round: 0,
            choice: HdmChoice::Adhere,
        })
        .unwrap();
        let before = s.view();
        let err = s
            .act(ActRequest {
                round: 0,
                choice: HdmChoice::Adhere,
            })
            .unwrap_err();
        assert!(matches!(err, ServiceError::StaleRound { expected: 1, got: 0 }));
        assert_eq!(s.view(), before);
        assert_eq!(s.history().len(), 1);
    }

    #[test]
    fn file_round_trip_continues_identically() {
        let mut a = machine(3);
        for round in 0..5 {
            a.act(ActRequest {
                round,
                choice: HdmChoice::Baseline,
            })
            .unwrap();
        }
        let text = serde_json::to_string(&a.to_file()).unwrap();
        let mut b = Session::from_file(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(a.view(), b.view());
        for round in 5..15 {
            let req = ActRequest {
                round,
                choice: HdmChoice::Adhere,
            };
            assert_eq!(a.act(req).unwrap(), b.act(req).unwrap());
        }
    }

    #[test]
    fn unknown_preset_is_a_bad_request() {
        let request = CreateSession {
            env: EnvDescriptor::Preset("/etc/passwd".into()),
            learner: LearnerOptions::default(),
            seed: 0,
            unconstrained_hdm: false,
        };
        assert!(matches!(
            Session::create("x".into(), &request),
            Err(ServiceError::BadRequest(_))
        ));
    }

    #[test]
    fn empty_history_still_has_a_header() {
        let csv = machine(0).history_csv().unwrap();
        assert!(csv.starts_with("round,x,u_r,u_b,u,observation"));
    }
}
