//! Adherence-aware Q-learning for finite MDPs.
//!
//! A recommender proposes actions to a human decision maker who implements
//! the recommendation with an unknown probability θ (the adherence level)
//! and otherwise falls back to a known deterministic baseline law. This crate
//! provides:
//!
//! - [`mdp`]: finite MDPs, deterministic and mixed laws, exact and Monte
//!   Carlo policy evaluation, and the JSON interchange format;
//! - [`adherence`]: the online estimate of θ;
//! - [`oracle`]: the adherence-aware Bellman operator and value iteration;
//! - [`learner`]: adherence-aware and classical tabular Q-learning;
//! - [`envs`]: inventory control and machine replacement benchmarks;
//! - [`snapshot`]: learner snapshot files.

pub mod adherence;
pub mod envs;
pub mod error;
pub mod learner;
pub mod mdp;
pub mod oracle;
pub mod snapshot;

pub use adherence::{classify_action, AdherenceEstimate, AdherenceObservation};
pub use error::{Error, Result};
pub use learner::{
    run_episode, run_steps, AlphaSchedule, DecisionMaker, EpsilonSchedule, HdmChoice, LearnerConfig, LearnerMode,
    LearnerState, QUpdate, ScriptedHdm, SimulatedHdm, Transition,
};
pub use mdp::{
    evaluate_law_exact, greedy_policy, mix_law, rollout_return, sample_transition, DeterministicPolicy, FiniteMdp,
    MdpDocument, MixedLaw, QTable, ValueVector,
};
pub use oracle::{apply_operator, contraction_modulus, value_iteration, OracleSolution};
pub use snapshot::LearnerSnapshot;
