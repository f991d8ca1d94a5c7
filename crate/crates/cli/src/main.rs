//! `dads`: skill discovery, latent-space planning, and evaluation from the
//! command line.
//!
//! Subcommands: `train`, `plan`, `eval`, `export-traces`, `baseline`. Every
//! command accepts `--config` and `--seed` and prints the resolved
//! configuration before running. Outputs (metrics, checkpoints, CSV tables,
//! SVG plots) go to the configured output directory; the `DADS_OUT_ROOT`
//! environment variable prepends a root to relative output paths.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dads_core::checkpoint::Checkpoint;
use dads_core::config::RunConfig;
use dads_core::env::RewardMode;
use dads_core::error::Result;
use dads_core::evals::{
    self, BaselineVariant, GoalTask,
};
use dads_core::planner::{PlannerConfig, SamplingSim};
use dads_core::trainer::{train, TrainerState};
use dads_core::{plot, Real, RngStream};

mod output;

#[derive(Parser)]
#[command(name = "dads", version, about = "Unsupervised skill discovery with latent-space MPPI planning")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Discover skills and fit their dynamics model
    Train {
        /// Key=value config file; defaults apply for absent keys
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config's seed
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides the config's out_dir)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Resume from a checkpoint file
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Suppress per-iteration console lines
        #[arg(long)]
        quiet: bool,
    },
    /// Navigate to a goal with the latent planner, zero-shot
    Plan {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Goal position "x,y"
        #[arg(long)]
        goal: String,
        /// Reward mode: dense | sparse
        #[arg(long, default_value = "dense")]
        mode: String,
        /// Config overriding the checkpoint snapshot
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an evaluation suite on a checkpoint
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// One of: variance | orientation | prediction | goals
        #[arg(long)]
        suite: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Roll the evaluation skills and export trace tables and plots
    ExportTraces {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate an action-space MBRL baseline
    Baseline {
        /// random | strong_oracle
        #[arg(long)]
        variant: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Environment-step budget; defaults to the configured training budget
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(path: &Option<PathBuf>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Config for checkpoint-driven commands: the file wins over the snapshot.
fn config_for_checkpoint(ck: &Checkpoint, path: &Option<PathBuf>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::parse(&ck.config_text)?,
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_out_dir(cfg: &RunConfig, out: &Option<PathBuf>) -> PathBuf {
    let base = out.clone().unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    match std::env::var_os("DADS_OUT_ROOT") {
        Some(root) if base.is_relative() => Path::new(&root).join(base),
        _ => base,
    }
}

fn print_resolved(cfg: &RunConfig, out_dir: &Path) {
    println!("# resolved configuration");
    print!("{}", cfg.to_text());
    println!("# output directory: {}", out_dir.display());
}

fn parse_goal(s: &str) -> Result<[Real; 2]> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(dads_core::Error::InvalidArgument(format!(
            "goal must be `x,y`, got `{s}`"
        )));
    }
    let x: Real = parts[0].trim().parse().map_err(|_| {
        dads_core::Error::InvalidArgument(format!("goal coordinate `{}` is not a number", parts[0]))
    })?;
    let y: Real = parts[1].trim().parse().map_err(|_| {
        dads_core::Error::InvalidArgument(format!("goal coordinate `{}` is not a number", parts[1]))
    })?;
    Ok([x, y])
}

fn parse_mode(s: &str) -> Result<RewardMode> {
    match s {
        "dense" => Ok(RewardMode::Dense),
        "sparse" => Ok(RewardMode::Sparse),
        other => Err(dads_core::Error::InvalidArgument(format!(
            "mode must be dense or sparse, got `{other}`"
        ))),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Train {
            config,
            seed,
            out,
            resume,
            quiet,
        } => {
            let mut state = match &resume {
                Some(ck_path) => {
                    let ck = Checkpoint::load(ck_path)?;
                    let mut state = TrainerState::from_checkpoint(&ck)?;
                    if let Some(p) = &config {
                        // a fresh config may extend the run; learned state is kept
                        let mut cfg = RunConfig::from_file(p)?;
                        if let Some(s) = seed {
                            cfg.seed = s;
                        }
                        cfg.validate()?;
                        state.cfg = cfg;
                    }
                    state
                }
                None => TrainerState::new(load_config(&config, seed)?)?,
            };
            let out_dir = resolve_out_dir(&state.cfg, &out);
            print_resolved(&state.cfg, &out_dir);
            let summary = train(&mut state, &out_dir, quiet)?;
            println!(
                "trained {} iterations; final checkpoint {}",
                summary.iterations_run,
                summary.final_checkpoint.display()
            );
            Ok(())
        }

        Cmd::Plan {
            checkpoint,
            goal,
            mode,
            config,
            seed,
            out,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let cfg = config_for_checkpoint(&ck, &config, seed)?;
            let out_dir = resolve_out_dir(&cfg, &out);
            print_resolved(&cfg, &out_dir);
            let state = TrainerState::from_checkpoint(&ck)?;
            let goal = parse_goal(&goal)?;
            let mode = parse_mode(&mode)?;
            let task = GoalTask {
                goal,
                mode,
                epsilon: cfg.eval.epsilon,
                horizon: cfg.env.horizon,
            };
            let planner_cfg: PlannerConfig<Real> = cfg.planner_config();
            let mut env = cfg.make_env()?;
            let mut rng = RngStream::new(cfg.seed, 60);
            let (outcome, delta) = if cfg.dynamics.sample_sim {
                let sim = SamplingSim {
                    model: &state.dynamics,
                    rng: std::cell::RefCell::new(RngStream::new(cfg.seed, 63)),
                };
                evals::plan_to_goal(
                    &state.policy,
                    &sim,
                    &mut env,
                    &task,
                    &planner_cfg,
                    cfg.skill.dim,
                    &mut rng,
                )?
            } else {
                evals::plan_to_goal(
                    &state.policy,
                    &state.dynamics,
                    &mut env,
                    &task,
                    &planner_cfg,
                    cfg.skill.dim,
                    &mut rng,
                )?
            };
            std::fs::create_dir_all(&out_dir)?;
            let csv_path = out_dir.join("plan_trajectory.csv");
            output::write_plan_csv(&csv_path, &outcome)?;
            let plots = out_dir.join("plots");
            std::fs::create_dir_all(&plots)?;
            let svg_path = plots.join("plan_trajectory.svg");
            let series = vec![(
                format!("goal {:.2},{:.2}", goal[0], goal[1]),
                outcome.steps.iter().map(|s| (s.next_state[0], s.next_state[1])).collect(),
            )];
            std::fs::write(&svg_path, plot::polyline_chart("planned trajectory", &series))?;
            let reached = evals::reached_goal(&outcome, &env, goal, cfg.eval.epsilon);
            println!(
                "goal ({:.2}, {:.2})  mode {mode:?}  delta {delta:.4}  return {:.3}  reached {}",
                goal[0], goal[1], outcome.achieved_return, reached
            );
            if outcome.excluded_samples > 0 {
                eprintln!(
                    "warning: {} sampled plans produced non-finite rewards and were excluded",
                    outcome.excluded_samples
                );
            }
            println!("trajectory written to {}", csv_path.display());
            Ok(())
        }

        Cmd::Eval {
            checkpoint,
            suite,
            config,
            seed,
            out,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let cfg = config_for_checkpoint(&ck, &config, seed)?;
            let out_dir = resolve_out_dir(&cfg, &out);
            print_resolved(&cfg, &out_dir);
            let state = TrainerState::from_checkpoint(&ck)?;
            std::fs::create_dir_all(&out_dir)?;
            run_suite(&suite, &cfg, &state, &out_dir)
        }

        Cmd::ExportTraces {
            checkpoint,
            config,
            seed,
            out,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let cfg = config_for_checkpoint(&ck, &config, seed)?;
            let out_dir = resolve_out_dir(&cfg, &out);
            print_resolved(&cfg, &out_dir);
            let state = TrainerState::from_checkpoint(&ck)?;
            std::fs::create_dir_all(&out_dir)?;
            let mut env = cfg.make_env()?;
            let mut rng = RngStream::new(cfg.seed, 61);
            let skills = evals::eval_skills(&state.space, 4, &mut rng);
            let plots = out_dir.join("plots");
            std::fs::create_dir_all(&plots)?;
            let csv_path = out_dir.join("traces.csv");
            let svg_path = plots.join("traces.svg");
            output::export_skill_traces(
                &csv_path,
                &svg_path,
                &state.policy,
                &mut env,
                &skills,
                cfg.eval.episodes_per_skill,
                &mut rng,
            )?;
            println!("traces written to {}", csv_path.display());
            Ok(())
        }

        Cmd::Baseline {
            variant,
            config,
            seed,
            budget,
            out,
        } => {
            let cfg = load_config(&config, seed)?;
            let out_dir = resolve_out_dir(&cfg, &out);
            print_resolved(&cfg, &out_dir);
            let variant = BaselineVariant::parse(&variant)?;
            let budget = budget
                .unwrap_or(cfg.trainer.iterations * cfg.trainer.transitions_per_iter);
            let goals = evals::goal_set(cfg.seed, cfg.eval.num_goals, cfg.eval.goal_half_width);
            let report = evals::run_baseline_mbrl(variant, &cfg, budget, &goals, cfg.seed)?;
            std::fs::create_dir_all(&out_dir)?;
            let csv_path = out_dir.join(format!("baseline_{}.csv", report.variant));
            output::write_baseline_csv(&csv_path, &report, &goals)?;
            println!(
                "{} baseline: budget {} steps, mean delta {:.4} (std {:.4})",
                report.variant, report.budget_steps, report.mean_delta, report.std_delta
            );
            println!("per-goal table written to {}", csv_path.display());
            Ok(())
        }
    }
}

fn run_suite(suite: &str, cfg: &RunConfig, state: &TrainerState, out_dir: &Path) -> Result<()> {
    let mut env = cfg.make_env()?;
    let mut rng = RngStream::new(cfg.seed, 62);
    let plots = out_dir.join("plots");
    std::fs::create_dir_all(&plots)?;
    match suite {
        "variance" => {
            let skills = evals::eval_skills(&state.space, 4, &mut rng);
            let trained =
                evals::skill_variance(&state.policy, &mut env, &skills, cfg.eval.episodes_per_skill, &mut rng)?;
            let random = evals::random_action_variance(
                &mut env,
                skills.len(),
                cfg.eval.episodes_per_skill,
                &mut rng,
            )?;
            let csv_path = out_dir.join("variance.csv");
            output::write_variance_csv(&csv_path, &trained, &random)?;
            let svg = plot::polyline_chart(
                "per-step normalized trajectory std",
                &[
                    (
                        "skills".into(),
                        trained
                            .per_step
                            .iter()
                            .enumerate()
                            .filter(|(_, v)| v.is_finite())
                            .map(|(i, &v)| (i as f64, v))
                            .collect(),
                    ),
                    (
                        "random actions".into(),
                        random
                            .per_step
                            .iter()
                            .enumerate()
                            .filter(|(_, v)| v.is_finite())
                            .map(|(i, &v)| (i as f64, v))
                            .collect(),
                    ),
                ],
            );
            std::fs::write(plots.join("variance.svg"), svg)?;
            println!(
                "skill variance {:.4} vs random-action {:.4} (ratio {:.2})",
                trained.aggregate,
                random.aggregate,
                random.aggregate / trained.aggregate
            );
            println!("table written to {}", csv_path.display());
        }
        "orientation" => {
            let map = evals::orientation_map(&state.policy, &mut env, cfg.eval.orientation_grid, &mut rng)?;
            let csv_path = out_dir.join("orientation.csv");
            output::write_orientation_csv(&csv_path, &map)?;
            std::fs::write(
                plots.join("orientation.svg"),
                plot::angle_heatmap("trajectory heading per skill", &map.headings),
            )?;
            println!(
                "orientation grid {0}x{0}: smoothness {1:.1} deg, {2} undefined cells",
                cfg.eval.orientation_grid,
                map.smoothness.to_degrees(),
                map.undefined_cells
            );
            println!("table written to {}", csv_path.display());
        }
        "prediction" => {
            let skills = evals::eval_skills(&state.space, 4, &mut rng);
            let curve = evals::prediction_error_curve(
                &state.dynamics,
                &state.policy,
                &mut env,
                &skills,
                cfg.eval.prediction_horizon,
                cfg.eval.prediction_episodes,
                false,
                &mut rng,
            )?;
            let csv_path = out_dir.join("prediction_error.csv");
            output::write_curve_csv(&csv_path, "step,normalized_error", &curve)?;
            let pts: Vec<(f64, f64)> = curve
                .iter()
                .enumerate()
                .filter(|(_, v)| v.is_finite())
                .map(|(i, &v)| ((i + 1) as f64, v))
                .collect();
            std::fs::write(
                plots.join("prediction_error.svg"),
                plot::polyline_chart("open-loop normalized position error", &[("error".into(), pts)]),
            )?;
            let last = curve.iter().rev().find(|v| v.is_finite()).copied().unwrap_or(f64::NAN);
            println!("prediction error at final step: {last:.4}");
            println!("curve written to {}", csv_path.display());
        }
        "goals" => {
            let goals = evals::goal_set(cfg.seed, cfg.eval.num_goals, cfg.eval.goal_half_width);
            let planner_cfg = cfg.planner_config();
            let mut deltas = Vec::with_capacity(goals.len());
            for &goal in &goals {
                let task = GoalTask {
                    goal,
                    mode: RewardMode::Dense,
                    epsilon: cfg.eval.epsilon,
                    horizon: cfg.env.horizon,
                };
                let (_, delta) = evals::plan_to_goal(
                    &state.policy,
                    &state.dynamics,
                    &mut env,
                    &task,
                    &planner_cfg,
                    cfg.skill.dim,
                    &mut rng,
                )?;
                deltas.push(delta);
            }
            let csv_path = out_dir.join("goals.csv");
            output::write_goals_csv(&csv_path, &goals, &deltas)?;
            let mean = deltas.iter().sum::<Real>() / deltas.len() as Real;
            println!("mean delta over {} dense goals: {mean:.4}", goals.len());
            println!("table written to {}", csv_path.display());
        }
        other => {
            return Err(dads_core::Error::InvalidArgument(format!(
                "unknown eval suite `{other}` (expected variance | orientation | prediction | goals)"
            )))
        }
    }
    Ok(())
}
