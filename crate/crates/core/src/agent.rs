//! Skill-conditioned stochastic policy and critic.
//!
//! The policy is a tanh-squashed diagonal Gaussian: a trunk on the policy
//! observation concatenated with the skill, a mean head and a log-std head
//! (clamped to `[-5, 2]`). Action log-densities include the tanh
//! change-of-variables correction in its numerically stable form. The critic
//! is a single Q network with a soft-updated target copy; updates maximize
//! an entropy-regularized one-step objective on the intrinsic rewards.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::nn::{AdamState, Mlp};
use crate::rng::RngStream;
use crate::scalar::{softplus, Scalar};
use crate::tape::{NodeId, Tape};

const LOG_STD_MIN: f64 = -5.0;
const LOG_STD_MAX: f64 = 2.0;
const LN_2PI: f64 = 1.8378770664093453;
const LN_2: f64 = std::f64::consts::LN_2;
// tanh rounds to +-1.0 for large pre-activations; emitted actions are
// nudged back inside the open interval
const ACTION_MARGIN: f64 = 1e-12;

fn squash<S: Scalar>(u: S) -> S {
    let hi = S::one() - S::from_f64(ACTION_MARGIN);
    let a = u.tanh();
    if a > hi {
        hi
    } else if a < -hi {
        -hi
    } else {
        a
    }
}

#[derive(Debug, Clone)]
pub struct SkillPolicy<S: Scalar> {
    trunk: Mlp<S>,
    mean_head: Mlp<S>,
    logstd_head: Mlp<S>,
    obs_dim: usize,
    skill_dim: usize,
    action_dim: usize,
}

/// `log(1 - tanh(u)^2)` via `2 (ln 2 - u - softplus(-2u))`.
fn tanh_log_deriv<S: Scalar>(u: S) -> S {
    let two = S::from_f64(2.0);
    two * (S::from_f64(LN_2) - u - softplus(-two * u))
}

impl<S: Scalar> SkillPolicy<S> {
    pub fn new(
        obs_dim: usize,
        skill_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        rng: &mut RngStream,
    ) -> Self {
        assert!(!hidden.is_empty(), "policy needs at least one hidden layer");
        let mut trunk_sizes = vec![obs_dim + skill_dim];
        trunk_sizes.extend_from_slice(hidden);
        let trunk = Mlp::new(&trunk_sizes, rng);
        let h = *hidden.last().unwrap();
        SkillPolicy {
            trunk,
            mean_head: Mlp::new(&[h, action_dim], rng),
            logstd_head: Mlp::new(&[h, action_dim], rng),
            obs_dim,
            skill_dim,
            action_dim,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn skill_dim(&self) -> usize {
        self.skill_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn trunk(&self) -> &Mlp<S> {
        &self.trunk
    }

    pub fn mean_head(&self) -> &Mlp<S> {
        &self.mean_head
    }

    pub fn logstd_head(&self) -> &Mlp<S> {
        &self.logstd_head
    }

    pub fn trunk_mut(&mut self) -> &mut Mlp<S> {
        &mut self.trunk
    }

    pub fn mean_head_mut(&mut self) -> &mut Mlp<S> {
        &mut self.mean_head
    }

    pub fn logstd_head_mut(&mut self) -> &mut Mlp<S> {
        &mut self.logstd_head
    }

    pub fn nets(&self) -> Vec<&Mlp<S>> {
        vec![&self.trunk, &self.mean_head, &self.logstd_head]
    }

    /// Pre-squash distribution parameters `(mean, log_std)`.
    pub fn dist_params(&self, obs: &Array1<S>, skill: &Array1<S>) -> Result<(Array1<S>, Array1<S>)> {
        if obs.len() != self.obs_dim {
            return Err(Error::shape("policy observation", self.obs_dim, obs.len()));
        }
        if skill.len() != self.skill_dim {
            return Err(Error::shape("policy skill", self.skill_dim, skill.len()));
        }
        let mut input = Vec::with_capacity(self.obs_dim + self.skill_dim);
        input.extend(obs.iter().copied());
        input.extend(skill.iter().copied());
        let mut h = self.trunk.forward(&Array1::from(input))?;
        h.mapv_inplace(|x| if x > S::zero() { x } else { S::zero() });
        let mean = self.mean_head.forward(&h)?;
        let logstd = self.logstd_head.forward(&h)?.mapv(|v| {
            let lo = S::from_f64(LOG_STD_MIN);
            let hi = S::from_f64(LOG_STD_MAX);
            if v < lo {
                lo
            } else if v > hi {
                hi
            } else {
                v
            }
        });
        Ok((mean, logstd))
    }

    /// Squashed action for a fixed pre-drawn standard normal `noise`;
    /// returns the action and its exact log-density.
    pub fn act_with_noise(
        &self,
        obs: &Array1<S>,
        skill: &Array1<S>,
        noise: &Array1<S>,
    ) -> Result<(Array1<S>, S)> {
        let (mean, logstd) = self.dist_params(obs, skill)?;
        let mut action = Array1::zeros(self.action_dim);
        let mut logp = S::zero();
        for j in 0..self.action_dim {
            let std = logstd[j].exp();
            let u = mean[j] + std * noise[j];
            action[j] = squash(u);
            logp += -logstd[j]
                - S::from_f64(0.5 * LN_2PI)
                - S::from_f64(0.5) * noise[j] * noise[j]
                - tanh_log_deriv(u);
        }
        if action.iter().any(|v| !v.is_finite()) || !logp.is_finite() {
            return Err(Error::NonFinite("policy action".into()));
        }
        Ok((action, logp))
    }

    /// Draw an action. Deterministic mode returns `tanh(mean)` and its density.
    pub fn act(
        &self,
        obs: &Array1<S>,
        skill: &Array1<S>,
        rng: &mut RngStream,
        deterministic: bool,
    ) -> Result<(Array1<S>, S)> {
        if deterministic {
            let (mean, _) = self.dist_params(obs, skill)?;
            let action = mean.mapv(squash);
            if action.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("policy action".into()));
            }
            let logp = self.log_density_of(obs, skill, &action)?;
            return Ok((action, logp));
        }
        let noise = Array1::from_iter((0..self.action_dim).map(|_| S::from_f64(rng.normal())));
        self.act_with_noise(obs, skill, &noise)
    }

    /// Exact log-density of an arbitrary action strictly inside `(-1, 1)`.
    pub fn log_density_of(&self, obs: &Array1<S>, skill: &Array1<S>, action: &Array1<S>) -> Result<S> {
        if action.len() != self.action_dim {
            return Err(Error::shape("policy action", self.action_dim, action.len()));
        }
        let (mean, logstd) = self.dist_params(obs, skill)?;
        let one = S::one();
        let mut logp = S::zero();
        for j in 0..self.action_dim {
            let a = action[j];
            if a <= -one || a >= one {
                return Err(Error::InvalidArgument(
                    "action outside the open interval (-1, 1)".into(),
                ));
            }
            // atanh
            let u = S::from_f64(0.5) * ((one + a) / (one - a)).ln();
            let std = logstd[j].exp();
            let xi = (u - mean[j]) / std;
            logp += -logstd[j]
                - S::from_f64(0.5 * LN_2PI)
                - S::from_f64(0.5) * xi * xi
                - tanh_log_deriv(u);
        }
        Ok(logp)
    }

    /// Squashed-Gaussian sample expressed on a tape: differentiable w.r.t.
    /// the bound policy parameters. Returns `(action_node, log_density_node)`.
    #[allow(clippy::too_many_arguments)]
    pub fn act_on_tape(
        &self,
        tape: &mut Tape<S>,
        vars: &PolicyVars,
        obs: &Array1<S>,
        skill: &Array1<S>,
        noise: &Array1<S>,
    ) -> (NodeId, NodeId) {
        let mut input = Vec::with_capacity(self.obs_dim + self.skill_dim);
        input.extend(obs.iter().copied());
        input.extend(skill.iter().copied());
        let x = tape.constant(Array1::from(input));
        let trunk_out = self.trunk.forward_tape(tape, &vars.trunk, x);
        let h = tape.relu(trunk_out);
        let mean = self.mean_head.forward_tape(tape, &vars.mean, h);
        let logstd_raw = self.logstd_head.forward_tape(tape, &vars.logstd, h);
        let logstd = tape.clamp(logstd_raw, S::from_f64(LOG_STD_MIN), S::from_f64(LOG_STD_MAX));
        let std = tape.exp(logstd);
        let xi = tape.constant(noise.clone());
        let scaled = tape.mul(std, xi);
        let u = tape.add(mean, scaled);
        let action = tape.tanh(u);

        // log density: Gaussian part expressed through (u - mean)/std so the
        // gradient flows through both the sample and the parameters
        let diff = tape.sub(u, mean);
        let neg_logstd = tape.neg(logstd);
        let inv_std = tape.exp(neg_logstd);
        let standardized = tape.mul(diff, inv_std);
        let sq = tape.sum_squares(standardized);
        let gauss_quad = tape.scale(sq, S::from_f64(-0.5));
        let logstd_sum = tape.sum(logstd);
        let neg_logstd_sum = tape.neg(logstd_sum);
        let k = self.action_dim as f64;
        let gauss_base = tape.offset(neg_logstd_sum, S::from_f64(-0.5 * k * LN_2PI));
        let gauss = tape.add(gauss_quad, gauss_base);

        // tanh correction: sum_j 2 (ln 2 - u_j - softplus(-2 u_j))
        let minus_two_u = tape.scale(u, S::from_f64(-2.0));
        let sp = tape.softplus(minus_two_u);
        let sp_sum = tape.sum(sp);
        let u_sum = tape.sum(u);
        let sp_plus_u = tape.add(sp_sum, u_sum);
        let neg = tape.neg(sp_plus_u);
        let corr = tape.offset(neg, S::from_f64(k * LN_2));
        let correction = tape.scale(corr, S::from_f64(2.0));

        let logp = tape.sub(gauss, correction);
        (action, logp)
    }

    pub fn bind(&self, tape: &mut Tape<S>) -> PolicyVars {
        PolicyVars {
            trunk: self.trunk.bind(tape),
            mean: self.mean_head.bind(tape),
            logstd: self.logstd_head.bind(tape),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PolicyVars {
    pub trunk: crate::nn::MlpVars,
    pub mean: crate::nn::MlpVars,
    pub logstd: crate::nn::MlpVars,
}

#[derive(Debug, Clone)]
pub struct Critic<S: Scalar> {
    online: Mlp<S>,
    target: Mlp<S>,
    tau: S,
}

impl<S: Scalar> Critic<S> {
    pub fn new(
        obs_dim: usize,
        action_dim: usize,
        skill_dim: usize,
        hidden: &[usize],
        tau: S,
        rng: &mut RngStream,
    ) -> Self {
        let mut sizes = vec![obs_dim + action_dim + skill_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let online = Mlp::new(&sizes, rng);
        let target = online.clone();
        Critic { online, target, tau }
    }

    pub fn online(&self) -> &Mlp<S> {
        &self.online
    }

    pub fn online_mut(&mut self) -> &mut Mlp<S> {
        &mut self.online
    }

    pub fn target(&self) -> &Mlp<S> {
        &self.target
    }

    pub fn target_mut(&mut self) -> &mut Mlp<S> {
        &mut self.target
    }

    pub fn tau(&self) -> S {
        self.tau
    }

    fn q_input(obs: &Array1<S>, action: &Array1<S>, skill: &Array1<S>) -> Array1<S> {
        let mut v = Vec::with_capacity(obs.len() + action.len() + skill.len());
        v.extend(obs.iter().copied());
        v.extend(action.iter().copied());
        v.extend(skill.iter().copied());
        Array1::from(v)
    }

    pub fn q_value(&self, obs: &Array1<S>, action: &Array1<S>, skill: &Array1<S>) -> Result<S> {
        Ok(self.online.forward(&Self::q_input(obs, action, skill))?[0])
    }

    pub fn target_value(&self, obs: &Array1<S>, action: &Array1<S>, skill: &Array1<S>) -> Result<S> {
        Ok(self.target.forward(&Self::q_input(obs, action, skill))?[0])
    }

    /// `target <- (1 - tau) target + tau online`.
    pub fn soft_update(&mut self) {
        let tau = self.tau;
        self.target.blend_from(&self.online, tau);
    }
}

/// Minibatch prepared for one update step. `obs`/`next_obs` are policy
/// observations; rewards are the intrinsic rewards.
#[derive(Debug, Clone)]
pub struct AgentBatch<S: Scalar> {
    pub obs: Array2<S>,
    pub actions: Array2<S>,
    pub skills: Array2<S>,
    pub rewards: Array1<S>,
    pub next_obs: Array2<S>,
}

#[derive(Debug, Clone, Copy)]
pub struct UpdateConfig<S: Scalar> {
    pub entropy_coeff: S,
    pub discount: S,
}

#[derive(Debug, Clone, Copy)]
pub struct UpdateReport<S: Scalar> {
    pub critic_loss: S,
    pub policy_loss: S,
    pub mean_q: S,
    pub mean_log_prob: S,
}

/// One critic step toward the entropy-regularized one-step target, one
/// policy step through the reparameterized action, then a soft target
/// update.
pub fn rl_update<S: Scalar>(
    policy: &mut SkillPolicy<S>,
    critic: &mut Critic<S>,
    batch: &AgentBatch<S>,
    cfg: &UpdateConfig<S>,
    policy_adam: &mut AdamState<S>,
    critic_adam: &mut AdamState<S>,
    rng: &mut RngStream,
) -> Result<UpdateReport<S>> {
    let n = batch.obs.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("rl_update: empty batch".into()));
    }
    let beta = cfg.entropy_coeff;
    let gamma = cfg.discount;

    // -- targets (no gradients) --
    let mut targets = Array1::zeros(n);
    for r in 0..n {
        let next_obs = batch.next_obs.row(r).to_owned();
        let skill = batch.skills.row(r).to_owned();
        let noise = Array1::from_iter((0..policy.action_dim()).map(|_| S::from_f64(rng.normal())));
        let (next_action, next_logp) = policy.act_with_noise(&next_obs, &skill, &noise)?;
        let tq = critic.target_value(&next_obs, &next_action, &skill)?;
        targets[r] = batch.rewards[r] + gamma * (tq - beta * next_logp);
    }

    // -- critic step: mean squared error to the frozen targets --
    let mut tape = Tape::new();
    let qvars = critic.online.bind(&mut tape);
    let mut per_sample = Vec::with_capacity(n);
    for r in 0..n {
        let input = Critic::q_input(
            &batch.obs.row(r).to_owned(),
            &batch.actions.row(r).to_owned(),
            &batch.skills.row(r).to_owned(),
        );
        let x = tape.constant(input);
        let q = critic.online.forward_tape(&mut tape, &qvars, x);
        let err = tape.offset(q, -targets[r]);
        per_sample.push(tape.square(err));
    }
    let stacked = tape.stack(&per_sample);
    let total = tape.sum(stacked);
    let critic_loss = tape.scale(total, S::from_f64(1.0 / n as f64));
    let critic_loss_value = tape.scalar_value(critic_loss);
    let grads = tape.backward(critic_loss)?;
    let q_grads = critic.online.grads_from(&grads, &qvars);
    critic_adam.apply(&mut [&mut critic.online], &[q_grads])?;

    // -- policy step: maximize E[Q(s, a~, z) - beta log pi(a~|s, z)] --
    let mut tape = Tape::new();
    let pvars = policy.bind(&mut tape);
    let qvars = critic.online.bind(&mut tape); // constants; their grads are ignored
    let mut per_sample = Vec::with_capacity(n);
    let mut mean_q = S::zero();
    let mut mean_logp = S::zero();
    for r in 0..n {
        let obs = batch.obs.row(r).to_owned();
        let skill = batch.skills.row(r).to_owned();
        let noise = Array1::from_iter((0..policy.action_dim()).map(|_| S::from_f64(rng.normal())));
        let (action, logp) = policy.act_on_tape(&mut tape, &pvars, &obs, &skill, &noise);
        let obs_const = tape.constant(obs);
        let skill_const = tape.constant(skill);
        let oa = tape.concat(obs_const, action);
        let input = tape.concat(oa, skill_const);
        let q = critic.online.forward_tape(&mut tape, &qvars, input);
        let beta_logp = tape.scale(logp, beta);
        let loss_r = tape.sub(beta_logp, q);
        per_sample.push(loss_r);
        mean_q += tape.scalar_value(q);
        mean_logp += tape.scalar_value(logp);
    }
    let policy_loss = tape.mean_of(&per_sample);
    let policy_loss_value = tape.scalar_value(policy_loss);
    let grads = tape.backward(policy_loss)?;
    let p_grads = vec![
        policy.trunk.grads_from(&grads, &pvars.trunk),
        policy.mean_head.grads_from(&grads, &pvars.mean),
        policy.logstd_head.grads_from(&grads, &pvars.logstd),
    ];
    policy_adam.apply(
        &mut [
            &mut policy.trunk,
            &mut policy.mean_head,
            &mut policy.logstd_head,
        ],
        &p_grads,
    )?;

    critic.soft_update();

    Ok(UpdateReport {
        critic_loss: critic_loss_value,
        policy_loss: policy_loss_value,
        mean_q: mean_q / S::from_f64(n as f64),
        mean_log_prob: mean_logp / S::from_f64(n as f64),
    })
}
