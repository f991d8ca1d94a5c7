//! End-to-end command tests driving the compiled binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dads_bin() -> PathBuf {
    let mut p = PathBuf::from(env!("CARGO_BIN_EXE_dads"));
    assert!(p.exists(), "binary not built: {}", p.display());
    p = p.canonicalize().unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(dads_bin())
        .args(args)
        .output()
        .expect("failed to spawn dads")
}

fn write_tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("tiny.cfg");
    std::fs::write(
        &path,
        "seed = 11\n\
         env.horizon = 20\n\
         trainer.transitions_per_iter = 40\n\
         trainer.iterations = 2\n\
         trainer.checkpoint_every = 0\n\
         agent.hidden_sizes = 8,8\n\
         dynamics.hidden_sizes = 8,8\n\
         agent.updates_per_iter = 4\n\
         agent.batch_size = 16\n\
         dynamics.fit_steps = 4\n\
         dynamics.batch_size = 16\n\
         reward.L = 8\n\
         planner.samples = 8\n\
         planner.refine_steps = 2\n\
         eval.num_goals = 2\n\
         eval.episodes_per_skill = 2\n\
         eval.orientation_grid = 3\n\
         eval.prediction_horizon = 5\n\
         eval.prediction_episodes = 1\n",
    )
    .unwrap();
    path
}

#[test]
fn unknown_subcommand_exits_nonzero() {
    let out = run(&["frobnicate"]);
    assert!(!out.status.success());
}

#[test]
fn invalid_config_names_the_offending_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, "planner.bogus_knob = 3\n").unwrap();
    let out = run(&[
        "train",
        "--config",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("planner.bogus_knob"), "stderr: {stderr}");
}

#[test]
fn train_prints_resolved_config_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out1_dir = dir.path().join("r1");
    let out2_dir = dir.path().join("r2");
    let out1 = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out1_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(out1.status.success(), "{}", String::from_utf8_lossy(&out1.stderr));
    let stdout = String::from_utf8_lossy(&out1.stdout);
    assert!(stdout.contains("# resolved configuration"));
    assert!(stdout.contains("seed = 11"));
    let out2 = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out2_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(out2.status.success());
    let m1 = std::fs::read_to_string(out1_dir.join("metrics.csv")).unwrap();
    let m2 = std::fs::read_to_string(out2_dir.join("metrics.csv")).unwrap();
    assert_eq!(m1, m2, "same-seed metrics files must match");
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "99",
        "--out",
        dir.path().join("o").to_str().unwrap(),
        "--quiet",
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("seed = 99"));
}

#[test]
fn plan_eval_and_traces_run_on_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let train_dir = dir.path().join("t");
    let out = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        train_dir.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ck = train_dir.join("ck_final.ckpt");

    // plan prints the distance metric and writes the trajectory table
    let plan_dir = dir.path().join("p");
    let out = run(&[
        "plan",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--goal",
        "2,2",
        "--mode",
        "dense",
        "--out",
        plan_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("delta"), "stdout: {stdout}");
    let csv = std::fs::read_to_string(plan_dir.join("plan_trajectory.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "episode,step,z0,z1,s0,s1,s2,s3,a0,a1,reward");
    assert_eq!(csv.lines().count(), 21); // header + 20 steps

    // eval variance emits the table
    let eval_dir = dir.path().join("e");
    let out = run(&[
        "eval",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--suite",
        "variance",
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(eval_dir.join("variance.csv").exists());
    assert!(eval_dir.join("plots").join("variance.svg").exists());

    // unknown suite is a clean failure
    let out = run(&[
        "eval",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--suite",
        "nope",
        "--out",
        eval_dir.to_str().unwrap(),
    ]);
    assert!(!out.status.success());

    // export-traces writes csv + svg
    let tr_dir = dir.path().join("tr");
    let out = run(&[
        "export-traces",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--out",
        tr_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tr_dir.join("traces.csv").exists());
    assert!(tr_dir.join("plots").join("traces.svg").exists());
}

#[test]
fn out_root_env_var_prefixes_relative_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let out = Command::new(dads_bin())
        .args([
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "rel_out",
            "--quiet",
        ])
        .env("DADS_OUT_ROOT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("rel_out").join("ck_final.ckpt").exists());
}

#[test]
fn resume_continues_from_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_tiny_config(dir.path());
    let d1 = dir.path().join("first");
    let out = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        d1.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(out.status.success());
    // extend the run to 3 iterations from the 2-iteration checkpoint
    let cfg3 = dir.path().join("three.cfg");
    let text = std::fs::read_to_string(&cfg).unwrap().replace(
        "trainer.iterations = 2",
        "trainer.iterations = 3",
    );
    std::fs::write(&cfg3, text).unwrap();
    let d2 = dir.path().join("second");
    let out = run(&[
        "train",
        "--config",
        cfg3.to_str().unwrap(),
        "--resume",
        d1.join("ck_final.ckpt").to_str().unwrap(),
        "--out",
        d2.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = std::fs::read_to_string(d2.join("metrics.csv")).unwrap();
    // resumed run logs exactly the one extra iteration
    assert_eq!(metrics.lines().count(), 2);
    assert!(metrics.lines().nth(1).unwrap().starts_with("3,"));
}
