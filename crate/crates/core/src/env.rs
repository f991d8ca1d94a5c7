//! Episodic 2-D environments with stochastic analytic dynamics, plus the
//! test-time goal reward functions.
//!
//! Two built-in environments share the same contract:
//!
//! - `point_mass`: state `(x, y, vx, vy)`, action = 2-D acceleration in
//!   `[-1, 1]^2`. Semi-implicit Euler with velocity clipping, Gaussian noise
//!   added to the velocity coordinates each step.
//! - `unicycle`: state `(x, y, theta, v)`, action = (turn rate, forward
//!   acceleration). Speed is clipped to `[0, 1]`; Gaussian noise perturbs the
//!   heading each step.
//!
//! The policy observes the state with the global `(x, y)` position removed.
//! The skill-dynamics model observes a configurable index subset
//! ([`EnvSpec::dynamics_obs`]); with the x-y projection enabled that subset
//! is exactly the global position.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::skills::Skill;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    PointMass,
    Unicycle,
}

#[derive(Debug, Clone)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub horizon: usize,
    pub dt: f64,
    pub noise_std: f64,
    pub reset_jitter: f64,
    /// State coordinates fed to the skill-dynamics model.
    pub dynamics_obs: Vec<usize>,
    /// The `(x, y)` coordinates used for goals and excluded from policy input.
    pub global_pos: [usize; 2],
}

impl EnvSpec {
    /// Coordinates the dynamics model predicts deltas for: the dynamics
    /// observation plus the global position, deduplicated and sorted.
    pub fn predicted_indices(&self) -> Vec<usize> {
        let mut idx = self.dynamics_obs.clone();
        for g in self.global_pos {
            if !idx.contains(&g) {
                idx.push(g);
            }
        }
        idx.sort_unstable();
        idx
    }

    pub fn policy_obs_dim(&self) -> usize {
        self.state_dim - self.global_pos.len()
    }
}

#[derive(Debug, Clone)]
pub struct Env<S: Scalar> {
    kind: EnvKind,
    spec: EnvSpec,
    clip_events: u64,
    _marker: std::marker::PhantomData<S>,
}

impl<S: Scalar> Env<S> {
    pub fn point_mass(noise_std: f64, reset_jitter: f64, horizon: usize, dt: f64, xy_prior: bool) -> Self {
        let dynamics_obs = if xy_prior { vec![0, 1] } else { vec![2, 3] };
        Env {
            kind: EnvKind::PointMass,
            spec: EnvSpec {
                state_dim: 4,
                action_dim: 2,
                horizon,
                dt,
                noise_std,
                reset_jitter,
                dynamics_obs,
                global_pos: [0, 1],
            },
            clip_events: 0,
            _marker: std::marker::PhantomData,
        }
    }

    pub fn unicycle(noise_std: f64, reset_jitter: f64, horizon: usize, dt: f64, xy_prior: bool) -> Self {
        let dynamics_obs = if xy_prior { vec![0, 1] } else { vec![2, 3] };
        Env {
            kind: EnvKind::Unicycle,
            spec: EnvSpec {
                state_dim: 4,
                action_dim: 2,
                horizon,
                dt,
                noise_std,
                reset_jitter,
                dynamics_obs,
                global_pos: [0, 1],
            },
            clip_events: 0,
            _marker: std::marker::PhantomData,
        }
    }

    pub fn by_name(
        name: &str,
        noise_std: f64,
        reset_jitter: f64,
        horizon: usize,
        dt: f64,
        xy_prior: bool,
    ) -> Result<Self> {
        match name {
            "point_mass" => Ok(Env::point_mass(noise_std, reset_jitter, horizon, dt, xy_prior)),
            "unicycle" => Ok(Env::unicycle(noise_std, reset_jitter, horizon, dt, xy_prior)),
            other => Err(Error::Config(format!("unknown env.name `{other}`"))),
        }
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    /// Actions outside `[-1, 1]` are clipped; each occurrence is counted.
    pub fn clip_events(&self) -> u64 {
        self.clip_events
    }

    pub fn reset(&self, rng: &mut RngStream) -> Array1<S> {
        let mut state = Array1::zeros(self.spec.state_dim);
        let jitter = self.spec.reset_jitter;
        match self.kind {
            EnvKind::PointMass => {
                if jitter > 0.0 {
                    state[0] = S::from_f64(jitter * rng.normal());
                    state[1] = S::from_f64(jitter * rng.normal());
                }
            }
            EnvKind::Unicycle => {
                if jitter > 0.0 {
                    state[2] = S::from_f64(jitter * rng.normal());
                }
            }
        }
        state
    }

    pub fn step(
        &mut self,
        state: &Array1<S>,
        action: &Array1<S>,
        rng: &mut RngStream,
    ) -> Result<Array1<S>> {
        if state.len() != self.spec.state_dim {
            return Err(Error::shape("env step state", self.spec.state_dim, state.len()));
        }
        if action.len() != self.spec.action_dim {
            return Err(Error::shape("env step action", self.spec.action_dim, action.len()));
        }
        if state.iter().any(|v| !v.is_finite()) || action.iter().any(|v| !v.is_finite()) {
            return Err(Error::EnvFault("non-finite state or action".into()));
        }
        let one = S::one();
        let mut a = action.clone();
        for v in a.iter_mut() {
            if *v > one || *v < -one {
                self.clip_events += 1;
                *v = if *v > one { one } else { -one };
            }
        }
        let dt = S::from_f64(self.spec.dt);
        let noise = self.spec.noise_std;
        let mut next = state.clone();
        match self.kind {
            EnvKind::PointMass => {
                // v' = clip(v + a dt, +-1), x' = x + v' dt, then velocity noise.
                for d in 0..2 {
                    let mut v = state[2 + d] + a[d] * dt;
                    if v > one {
                        v = one;
                    } else if v < -one {
                        v = -one;
                    }
                    next[2 + d] = v;
                    next[d] = state[d] + v * dt;
                }
                if noise > 0.0 {
                    for d in 0..2 {
                        next[2 + d] += S::from_f64(noise * rng.normal());
                    }
                }
            }
            EnvKind::Unicycle => {
                // theta' = theta + a1 dt (+ noise), v' = clip(v + a2 dt, [0, 1]),
                // x' = x + v' cos(theta') dt, y' = y + v' sin(theta') dt.
                let mut theta = state[2] + a[0] * dt;
                if noise > 0.0 {
                    theta += S::from_f64(noise * rng.normal());
                }
                let mut v = state[3] + a[1] * dt;
                if v > one {
                    v = one;
                } else if v < S::zero() {
                    v = S::zero();
                }
                next[0] = state[0] + v * theta.cos() * dt;
                next[1] = state[1] + v * theta.sin() * dt;
                next[2] = theta;
                next[3] = v;
            }
        }
        Ok(next)
    }

    /// State with the global position removed: what the policy sees.
    pub fn policy_obs(&self, state: &Array1<S>) -> Array1<S> {
        let [gx, gy] = self.spec.global_pos;
        Array1::from_iter(
            state
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != gx && *i != gy)
                .map(|(_, &v)| v),
        )
    }

    pub fn position(&self, state: &Array1<S>) -> [S; 2] {
        let [gx, gy] = self.spec.global_pos;
        [state[gx], state[gy]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardMode {
    Dense,
    Sparse,
}

/// Test-time goal reward. Dense: `-|g - u|`. Sparse: `1` iff `|u - g| <= eps`.
pub fn goal_reward<S: Scalar>(position: [S; 2], goal: [S; 2], mode: RewardMode, epsilon: S) -> S {
    let dx = goal[0] - position[0];
    let dy = goal[1] - position[1];
    let dist = (dx * dx + dy * dy).sqrt();
    match mode {
        RewardMode::Dense => -dist,
        RewardMode::Sparse => {
            if dist <= epsilon {
                S::one()
            } else {
                S::zero()
            }
        }
    }
}

/// One environment transition, tagged with the skill that produced it.
#[derive(Debug, Clone)]
pub struct Transition<S: Scalar> {
    pub state: Array1<S>,
    pub action: Array1<S>,
    pub next_state: Array1<S>,
    pub skill: Skill<S>,
    pub intrinsic_reward: S,
    pub episode_id: usize,
    pub step_index: usize,
}

/// An episode's transitions in order. Consecutive transitions chain.
#[derive(Debug, Clone)]
pub struct Trajectory<S: Scalar> {
    pub transitions: Vec<Transition<S>>,
}

impl<S: Scalar> Trajectory<S> {
    pub fn new(transitions: Vec<Transition<S>>) -> Self {
        Trajectory { transitions }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Checks that `next_state` of step `k` equals `state` of step `k + 1`.
    pub fn is_chained(&self) -> bool {
        self.transitions
            .windows(2)
            .all(|w| w[0].next_state == w[1].state && w[0].episode_id == w[1].episode_id)
    }

    /// Global positions after each step.
    pub fn positions(&self, env: &Env<S>) -> Vec<[S; 2]> {
        self.transitions
            .iter()
            .map(|t| env.position(&t.next_state))
            .collect()
    }
}
