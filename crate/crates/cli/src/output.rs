//! CSV and SVG artifact writers. Column orders are fixed:
//! trace tables are `episode,step,z*,s*,a*,reward`.

use std::io::Write;
use std::path::Path;

use dads_core::agent::SkillPolicy;
use dads_core::env::Env;
use dads_core::error::Result;
use dads_core::evals::{BaselineReport, OrientationMap, VarianceReport};
use dads_core::planner::EpisodeOutcome;
use dads_core::skills::Skill;
use dads_core::{plot, Real, RngStream};

fn trace_header(skill_dim: usize, state_dim: usize, action_dim: usize) -> String {
    let mut cols = vec!["episode".to_string(), "step".to_string()];
    cols.extend((0..skill_dim).map(|i| format!("z{i}")));
    cols.extend((0..state_dim).map(|i| format!("s{i}")));
    cols.extend((0..action_dim).map(|i| format!("a{i}")));
    cols.push("reward".into());
    cols.join(",")
}

/// Planned-episode trajectory: the latent occupies the skill columns.
pub fn write_plan_csv(path: &Path, outcome: &EpisodeOutcome<Real>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    if let Some(first) = outcome.steps.first() {
        writeln!(
            f,
            "{}",
            trace_header(first.latent.len(), first.next_state.len(), first.action.len())
        )?;
    }
    for (i, s) in outcome.steps.iter().enumerate() {
        let mut cols = vec!["0".to_string(), i.to_string()];
        cols.extend(s.latent.iter().map(|v| v.to_string()));
        cols.extend(s.next_state.iter().map(|v| v.to_string()));
        cols.extend(s.action.iter().map(|v| v.to_string()));
        cols.push(s.reward.to_string());
        writeln!(f, "{}", cols.join(","))?;
    }
    Ok(())
}

/// Rolls every skill `episodes` times and writes the trace table plus an
/// x-y trace plot (one series per skill).
pub fn export_skill_traces(
    csv_path: &Path,
    svg_path: &Path,
    policy: &SkillPolicy<Real>,
    env: &mut Env<Real>,
    skills: &[Skill<Real>],
    episodes: usize,
    rng: &mut RngStream,
) -> Result<()> {
    let spec = env.spec().clone();
    let mut f = std::fs::File::create(csv_path)?;
    writeln!(
        f,
        "{}",
        trace_header(skills.first().map(|z| z.dim()).unwrap_or(0), spec.state_dim, spec.action_dim)
    )?;
    let mut series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    let mut episode_id = 0usize;
    for (zi, z) in skills.iter().enumerate() {
        for _ in 0..episodes {
            let mut state = env.reset(rng);
            let mut pts = Vec::with_capacity(spec.horizon);
            for step in 0..spec.horizon {
                let obs = env.policy_obs(&state);
                let (action, _) = policy.act(&obs, z.values(), rng, false)?;
                let next = env.step(&state, &action, rng)?;
                let mut cols = vec![episode_id.to_string(), step.to_string()];
                cols.extend(z.values().iter().map(|v| v.to_string()));
                cols.extend(next.iter().map(|v| v.to_string()));
                cols.extend(action.iter().map(|v| v.to_string()));
                cols.push("0".into());
                writeln!(f, "{}", cols.join(","))?;
                let p = env.position(&next);
                pts.push((p[0], p[1]));
                state = next;
            }
            series.push((format!("skill {zi}"), pts));
            episode_id += 1;
        }
    }
    std::fs::write(svg_path, plot::polyline_chart("skill trajectories", &series))?;
    Ok(())
}

pub fn write_variance_csv(path: &Path, trained: &VarianceReport, random: &VarianceReport) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "step,skills_normalized_std,random_normalized_std")?;
    let n = trained.per_step.len().max(random.per_step.len());
    for t in 0..n {
        let a = trained.per_step.get(t).copied().unwrap_or(f64::NAN);
        let b = random.per_step.get(t).copied().unwrap_or(f64::NAN);
        writeln!(f, "{t},{a},{b}")?;
    }
    writeln!(f, "aggregate,{},{}", trained.aggregate, random.aggregate)?;
    Ok(())
}

pub fn write_orientation_csv(path: &Path, map: &OrientationMap) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "z0,z1,heading_radians")?;
    for (i, &zx) in map.grid.iter().enumerate() {
        for (j, &zy) in map.grid.iter().enumerate() {
            writeln!(f, "{zx},{zy},{}", map.headings[i][j])?;
        }
    }
    writeln!(f, "# smoothness_radians,{}", map.smoothness)?;
    writeln!(f, "# undefined_cells,{}", map.undefined_cells)?;
    Ok(())
}

pub fn write_curve_csv(path: &Path, header: &str, values: &[Real]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{header}")?;
    for (i, v) in values.iter().enumerate() {
        writeln!(f, "{},{v}", i + 1)?;
    }
    Ok(())
}

pub fn write_goals_csv(path: &Path, goals: &[[Real; 2]], deltas: &[Real]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "goal_x,goal_y,delta")?;
    for (g, d) in goals.iter().zip(deltas) {
        writeln!(f, "{},{},{}", g[0], g[1], d)?;
    }
    let mean = deltas.iter().sum::<Real>() / deltas.len().max(1) as Real;
    writeln!(f, "# mean_delta,{mean}")?;
    Ok(())
}

pub fn write_baseline_csv(path: &Path, report: &BaselineReport, goals: &[[Real; 2]]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "goal_x,goal_y,delta")?;
    for (g, d) in goals.iter().zip(&report.per_goal_delta) {
        writeln!(f, "{},{},{}", g[0], g[1], d)?;
    }
    writeln!(f, "# variant,{}", report.variant)?;
    writeln!(f, "# budget_steps,{}", report.budget_steps)?;
    writeln!(f, "# mean_delta,{}", report.mean_delta)?;
    writeln!(f, "# std_delta,{}", report.std_delta)?;
    Ok(())
}
