//! Unsupervised discovery of predictable skills with a learned
//! skill-conditioned dynamics model, and zero-shot goal-directed control by
//! planning in the learned skill space (DADS + latent-space MPPI).
//!
//! The numeric core is generic over the scalar type via [`scalar::Scalar`];
//! the aliases below pin everything to [`Real`] (`f64`), which is what the
//! trainer, planner, and CLI operate on.

pub mod agent;
pub mod checkpoint;
pub mod config;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod evals;
pub mod intrinsic;
pub mod nn;
pub mod planner;
pub mod plot;
pub mod rng;
pub mod scalar;
pub mod skills;
pub mod tape;
pub mod trainer;

pub use error::{Error, Result};
pub use rng::{RngState, RngStream};
pub use scalar::Scalar;
pub use skills::{SkillKind, SkillSpace};

/// Concrete scalar type used by the shipped binaries and tests.
pub type Real = f64;

pub type Tape = tape::Tape<Real>;
pub type Mlp = nn::Mlp<Real>;
pub type MlpGrads = nn::MlpGrads<Real>;
pub type AdamState = nn::AdamState<Real>;
pub type Skill = skills::Skill<Real>;
pub type SkillDynamics = dynamics::SkillDynamics<Real>;
pub type Normalizer = dynamics::Normalizer<Real>;
pub type Env = env::Env<Real>;
pub type Transition = env::Transition<Real>;
pub type Trajectory = env::Trajectory<Real>;
pub type SkillPolicy = agent::SkillPolicy<Real>;
pub type Critic = agent::Critic<Real>;
pub type PlannerConfig = planner::PlannerConfig<Real>;
pub type PlanDistribution = planner::PlanDistribution<Real>;
