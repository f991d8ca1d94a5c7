//! Flat `key = value` run configuration with block prefixes.
//!
//! Every key is validated against the schema below; unknown keys are errors.
//! Parsing is total: an accepted config always produces a fully resolved,
//! printable configuration ([`RunConfig::to_text`]), and parsing that text
//! again reproduces the same configuration.

use crate::error::{Error, Result};
use crate::intrinsic::RewardConfig;
use crate::planner::{ExecuteMode, PlannerConfig};
use crate::skills::{SkillKind, SkillSpace};
use crate::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvBlock {
    pub name: String,
    pub noise_std: f64,
    pub reset_jitter: f64,
    pub horizon: usize,
    pub dt: f64,
    pub xy_prior: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkillBlock {
    pub kind: SkillKind,
    pub dim: usize,
    /// 0 keeps the skill fixed for the whole episode; N > 0 resamples it
    /// every N steps.
    pub resample_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentBlock {
    pub hidden_sizes: Vec<usize>,
    pub entropy_coeff: f64,
    pub discount: f64,
    pub tau: f64,
    pub updates_per_iter: usize,
    pub batch_size: usize,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsBlock {
    pub hidden_sizes: Vec<usize>,
    pub experts: usize,
    pub batch_size: usize,
    pub fit_steps: usize,
    pub lr: f64,
    /// Plan simulation by sampling the mixture instead of its expectation.
    pub sample_sim: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainerBlock {
    pub transitions_per_iter: usize,
    pub iterations: usize,
    pub checkpoint_every: usize,
    pub eval_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardBlock {
    pub l: usize,
    pub marginalize_discrete: bool,
    pub include_current_skill: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerBlock {
    pub hp: usize,
    pub hz: usize,
    pub refine_steps: usize,
    pub samples: usize,
    pub gamma: f64,
    pub smooth_beta: f64,
    pub plan_std: f64,
    pub clip_latents: bool,
    pub execute_mode: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineBlock {
    pub hp: usize,
    pub hz: usize,
    pub refine_steps: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalBlock {
    pub goal_half_width: f64,
    pub num_goals: usize,
    pub epsilon: f64,
    pub episodes_per_skill: usize,
    pub orientation_grid: usize,
    pub prediction_horizon: usize,
    pub prediction_episodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: String,
    pub env: EnvBlock,
    pub skill: SkillBlock,
    pub agent: AgentBlock,
    pub dynamics: DynamicsBlock,
    pub trainer: TrainerBlock,
    pub reward: RewardBlock,
    pub planner: PlannerBlock,
    pub baseline: BaselineBlock,
    pub eval: EvalBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: "runs/default".into(),
            env: EnvBlock {
                name: "point_mass".into(),
                noise_std: 0.05,
                reset_jitter: 0.01,
                horizon: 200,
                dt: 0.1,
                xy_prior: true,
            },
            skill: SkillBlock {
                kind: SkillKind::Continuous,
                dim: 2,
                resample_steps: 0,
            },
            agent: AgentBlock {
                hidden_sizes: vec![32, 32],
                entropy_coeff: 0.1,
                discount: 0.99,
                tau: 0.005,
                updates_per_iter: 128,
                batch_size: 128,
                lr: 3e-4,
            },
            dynamics: DynamicsBlock {
                hidden_sizes: vec![32, 32],
                experts: 4,
                batch_size: 128,
                fit_steps: 32,
                lr: 3e-4,
                sample_sim: false,
            },
            trainer: TrainerBlock {
                transitions_per_iter: 2000,
                iterations: 250,
                checkpoint_every: 25,
                eval_every: 0,
            },
            reward: RewardBlock {
                l: 500,
                marginalize_discrete: true,
                include_current_skill: false,
            },
            planner: PlannerBlock {
                hp: 1,
                hz: 10,
                refine_steps: 10,
                samples: 50,
                gamma: 10.0,
                smooth_beta: 0.9,
                plan_std: 0.3,
                clip_latents: true,
                execute_mode: "mean".into(),
            },
            baseline: BaselineBlock {
                hp: 20,
                hz: 1,
                refine_steps: 10,
                samples: 50,
            },
            eval: EvalBlock {
                goal_half_width: 8.0,
                num_goals: 10,
                epsilon: 2.0,
                episodes_per_skill: 5,
                orientation_grid: 16,
                prediction_horizon: 50,
                prediction_episodes: 4,
            },
        }
    }
}

fn parse_u64(key: &str, v: &str) -> Result<u64> {
    v.parse()
        .map_err(|_| Error::Config(format!("key `{key}`: expected an unsigned integer, got `{v}`")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| Error::Config(format!("key `{key}`: expected an unsigned integer, got `{v}`")))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse()
        .map_err(|_| Error::Config(format!("key `{key}`: expected a number, got `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Config(format!(
            "key `{key}`: expected `true` or `false`, got `{v}`"
        ))),
    }
}

fn parse_sizes(key: &str, v: &str) -> Result<Vec<usize>> {
    let sizes: Result<Vec<usize>> = v
        .split(',')
        .map(|p| parse_usize(key, p.trim()))
        .collect();
    let sizes = sizes?;
    if sizes.is_empty() || sizes.iter().any(|&s| s == 0) {
        return Err(Error::Config(format!("key `{key}`: sizes must be positive")));
    }
    Ok(sizes)
}

fn fmt_sizes(sizes: &[usize]) -> String {
    sizes
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_u64(key, value)?,
            "out_dir" => self.out_dir = value.to_string(),
            "env.name" => {
                if value != "point_mass" && value != "unicycle" {
                    return Err(Error::Config(format!(
                        "key `env.name`: unknown environment `{value}`"
                    )));
                }
                self.env.name = value.to_string();
            }
            "env.noise_std" => self.env.noise_std = parse_f64(key, value)?,
            "env.reset_jitter" => self.env.reset_jitter = parse_f64(key, value)?,
            "env.horizon" => self.env.horizon = parse_usize(key, value)?,
            "env.dt" => self.env.dt = parse_f64(key, value)?,
            "env.xy_prior" => self.env.xy_prior = parse_bool(key, value)?,
            "skill.kind" => {
                self.skill.kind = match value {
                    "discrete" => SkillKind::Discrete,
                    "continuous" => SkillKind::Continuous,
                    _ => {
                        return Err(Error::Config(format!(
                            "key `skill.kind`: expected `discrete` or `continuous`, got `{value}`"
                        )))
                    }
                }
            }
            "skill.dim" => self.skill.dim = parse_usize(key, value)?,
            "skill.resample_steps" => self.skill.resample_steps = parse_usize(key, value)?,
            "agent.hidden_sizes" => self.agent.hidden_sizes = parse_sizes(key, value)?,
            "agent.entropy_coeff" => self.agent.entropy_coeff = parse_f64(key, value)?,
            "agent.discount" => self.agent.discount = parse_f64(key, value)?,
            "agent.tau" => self.agent.tau = parse_f64(key, value)?,
            "agent.updates_per_iter" => self.agent.updates_per_iter = parse_usize(key, value)?,
            "agent.batch_size" => self.agent.batch_size = parse_usize(key, value)?,
            "agent.lr" => self.agent.lr = parse_f64(key, value)?,
            "dynamics.hidden_sizes" => self.dynamics.hidden_sizes = parse_sizes(key, value)?,
            "dynamics.experts" => self.dynamics.experts = parse_usize(key, value)?,
            "dynamics.batch_size" => self.dynamics.batch_size = parse_usize(key, value)?,
            "dynamics.fit_steps" => self.dynamics.fit_steps = parse_usize(key, value)?,
            "dynamics.lr" => self.dynamics.lr = parse_f64(key, value)?,
            "dynamics.sample_sim" => self.dynamics.sample_sim = parse_bool(key, value)?,
            "trainer.transitions_per_iter" => {
                self.trainer.transitions_per_iter = parse_usize(key, value)?
            }
            "trainer.iterations" => self.trainer.iterations = parse_usize(key, value)?,
            "trainer.checkpoint_every" => self.trainer.checkpoint_every = parse_usize(key, value)?,
            "trainer.eval_every" => self.trainer.eval_every = parse_usize(key, value)?,
            "reward.L" => self.reward.l = parse_usize(key, value)?,
            "reward.marginalize_discrete" => {
                self.reward.marginalize_discrete = parse_bool(key, value)?
            }
            "reward.include_current_skill" => {
                self.reward.include_current_skill = parse_bool(key, value)?
            }
            "planner.hp" => self.planner.hp = parse_usize(key, value)?,
            "planner.hz" => self.planner.hz = parse_usize(key, value)?,
            "planner.refine_steps" => self.planner.refine_steps = parse_usize(key, value)?,
            "planner.samples" => self.planner.samples = parse_usize(key, value)?,
            "planner.gamma" => self.planner.gamma = parse_f64(key, value)?,
            "planner.smooth_beta" => self.planner.smooth_beta = parse_f64(key, value)?,
            "planner.plan_std" => self.planner.plan_std = parse_f64(key, value)?,
            "planner.clip_latents" => self.planner.clip_latents = parse_bool(key, value)?,
            "planner.execute_mode" => {
                if value != "mean" && value != "sample" {
                    return Err(Error::Config(format!(
                        "key `planner.execute_mode`: expected `mean` or `sample`, got `{value}`"
                    )));
                }
                self.planner.execute_mode = value.to_string();
            }
            "baseline.hp" => self.baseline.hp = parse_usize(key, value)?,
            "baseline.hz" => self.baseline.hz = parse_usize(key, value)?,
            "baseline.refine_steps" => self.baseline.refine_steps = parse_usize(key, value)?,
            "baseline.samples" => self.baseline.samples = parse_usize(key, value)?,
            "eval.goal_half_width" => self.eval.goal_half_width = parse_f64(key, value)?,
            "eval.num_goals" => self.eval.num_goals = parse_usize(key, value)?,
            "eval.epsilon" => self.eval.epsilon = parse_f64(key, value)?,
            "eval.episodes_per_skill" => self.eval.episodes_per_skill = parse_usize(key, value)?,
            "eval.orientation_grid" => self.eval.orientation_grid = parse_usize(key, value)?,
            "eval.prediction_horizon" => self.eval.prediction_horizon = parse_usize(key, value)?,
            "eval.prediction_episodes" => self.eval.prediction_episodes = parse_usize(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("env.horizon", self.env.horizon),
            ("skill.dim", self.skill.dim),
            ("agent.updates_per_iter", self.agent.updates_per_iter),
            ("agent.batch_size", self.agent.batch_size),
            ("dynamics.experts", self.dynamics.experts),
            ("dynamics.batch_size", self.dynamics.batch_size),
            ("dynamics.fit_steps", self.dynamics.fit_steps),
            ("trainer.transitions_per_iter", self.trainer.transitions_per_iter),
            ("reward.L", self.reward.l),
            ("planner.hp", self.planner.hp),
            ("planner.hz", self.planner.hz),
            ("planner.refine_steps", self.planner.refine_steps),
            ("planner.samples", self.planner.samples),
            ("baseline.hp", self.baseline.hp),
            ("baseline.hz", self.baseline.hz),
            ("baseline.refine_steps", self.baseline.refine_steps),
            ("baseline.samples", self.baseline.samples),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("key `{key}` must be positive")));
            }
        }
        if self.trainer.transitions_per_iter < self.env.horizon {
            return Err(Error::Config(
                "trainer.transitions_per_iter must be at least env.horizon".into(),
            ));
        }
        if self.env.dt <= 0.0 {
            return Err(Error::Config("env.dt must be positive".into()));
        }
        if self.env.noise_std < 0.0 || self.env.reset_jitter < 0.0 {
            return Err(Error::Config("noise levels must be nonnegative".into()));
        }
        if self.planner.gamma <= 0.0 {
            return Err(Error::Config("planner.gamma must be positive".into()));
        }
        Ok(())
    }

    /// Canonical text form: every key, fixed order. Parsing it reproduces
    /// this configuration exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kind = match self.skill.kind {
            SkillKind::Discrete => "discrete",
            SkillKind::Continuous => "continuous",
        };
        let pairs: Vec<(String, String)> = vec![
            ("seed".into(), self.seed.to_string()),
            ("out_dir".into(), self.out_dir.clone()),
            ("env.name".into(), self.env.name.clone()),
            ("env.noise_std".into(), self.env.noise_std.to_string()),
            ("env.reset_jitter".into(), self.env.reset_jitter.to_string()),
            ("env.horizon".into(), self.env.horizon.to_string()),
            ("env.dt".into(), self.env.dt.to_string()),
            ("env.xy_prior".into(), self.env.xy_prior.to_string()),
            ("skill.kind".into(), kind.into()),
            ("skill.dim".into(), self.skill.dim.to_string()),
            ("skill.resample_steps".into(), self.skill.resample_steps.to_string()),
            ("agent.hidden_sizes".into(), fmt_sizes(&self.agent.hidden_sizes)),
            ("agent.entropy_coeff".into(), self.agent.entropy_coeff.to_string()),
            ("agent.discount".into(), self.agent.discount.to_string()),
            ("agent.tau".into(), self.agent.tau.to_string()),
            ("agent.updates_per_iter".into(), self.agent.updates_per_iter.to_string()),
            ("agent.batch_size".into(), self.agent.batch_size.to_string()),
            ("agent.lr".into(), self.agent.lr.to_string()),
            ("dynamics.hidden_sizes".into(), fmt_sizes(&self.dynamics.hidden_sizes)),
            ("dynamics.experts".into(), self.dynamics.experts.to_string()),
            ("dynamics.batch_size".into(), self.dynamics.batch_size.to_string()),
            ("dynamics.fit_steps".into(), self.dynamics.fit_steps.to_string()),
            ("dynamics.lr".into(), self.dynamics.lr.to_string()),
            ("dynamics.sample_sim".into(), self.dynamics.sample_sim.to_string()),
            (
                "trainer.transitions_per_iter".into(),
                self.trainer.transitions_per_iter.to_string(),
            ),
            ("trainer.iterations".into(), self.trainer.iterations.to_string()),
            ("trainer.checkpoint_every".into(), self.trainer.checkpoint_every.to_string()),
            ("trainer.eval_every".into(), self.trainer.eval_every.to_string()),
            ("reward.L".into(), self.reward.l.to_string()),
            (
                "reward.marginalize_discrete".into(),
                self.reward.marginalize_discrete.to_string(),
            ),
            (
                "reward.include_current_skill".into(),
                self.reward.include_current_skill.to_string(),
            ),
            ("planner.hp".into(), self.planner.hp.to_string()),
            ("planner.hz".into(), self.planner.hz.to_string()),
            ("planner.refine_steps".into(), self.planner.refine_steps.to_string()),
            ("planner.samples".into(), self.planner.samples.to_string()),
            ("planner.gamma".into(), self.planner.gamma.to_string()),
            ("planner.smooth_beta".into(), self.planner.smooth_beta.to_string()),
            ("planner.plan_std".into(), self.planner.plan_std.to_string()),
            ("planner.clip_latents".into(), self.planner.clip_latents.to_string()),
            ("planner.execute_mode".into(), self.planner.execute_mode.clone()),
            ("baseline.hp".into(), self.baseline.hp.to_string()),
            ("baseline.hz".into(), self.baseline.hz.to_string()),
            ("baseline.refine_steps".into(), self.baseline.refine_steps.to_string()),
            ("baseline.samples".into(), self.baseline.samples.to_string()),
            ("eval.goal_half_width".into(), self.eval.goal_half_width.to_string()),
            ("eval.num_goals".into(), self.eval.num_goals.to_string()),
            ("eval.epsilon".into(), self.eval.epsilon.to_string()),
            ("eval.episodes_per_skill".into(), self.eval.episodes_per_skill.to_string()),
            ("eval.orientation_grid".into(), self.eval.orientation_grid.to_string()),
            ("eval.prediction_horizon".into(), self.eval.prediction_horizon.to_string()),
            ("eval.prediction_episodes".into(), self.eval.prediction_episodes.to_string()),
        ];
        for (k, v) in pairs {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn make_env(&self) -> Result<crate::Env> {
        crate::Env::by_name(
            &self.env.name,
            self.env.noise_std,
            self.env.reset_jitter,
            self.env.horizon,
            self.env.dt,
            self.env.xy_prior,
        )
    }

    pub fn skill_space(&self) -> SkillSpace {
        SkillSpace {
            kind: self.skill.kind,
            dim: self.skill.dim,
        }
    }

    pub fn reward_config(&self) -> RewardConfig {
        RewardConfig {
            num_prior_samples: self.reward.l,
            marginalize_discrete: self.reward.marginalize_discrete,
            include_current_skill: self.reward.include_current_skill,
        }
    }

    pub fn planner_config(&self) -> PlannerConfig<Real> {
        PlannerConfig {
            hp: self.planner.hp,
            hz: self.planner.hz,
            refine_steps: self.planner.refine_steps,
            samples: self.planner.samples,
            gamma: self.planner.gamma,
            smooth_beta: self.planner.smooth_beta,
            plan_std: self.planner.plan_std,
            clip_latents: self.planner.clip_latents,
            execute_mode: if self.planner.execute_mode == "sample" {
                ExecuteMode::Sample
            } else {
                ExecuteMode::Mean
            },
        }
    }

    /// Planner settings for the action-space MBRL baselines: horizons from
    /// the baseline block, everything else shared with the main planner.
    pub fn baseline_planner_config(&self) -> PlannerConfig<Real> {
        PlannerConfig {
            hp: self.baseline.hp,
            hz: self.baseline.hz,
            refine_steps: self.baseline.refine_steps,
            samples: self.baseline.samples,
            ..self.planner_config()
        }
    }
}
