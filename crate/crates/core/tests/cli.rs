use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ccp_irl::env::{read_true_reward, EnvSpec};
use ccp_irl::irl::{read_checkpoint, write_checkpoint, Algorithm, Checkpoint, LinearReward, OptimizerConfig, RewardParams};
use ccp_irl::model::{ensure_valid, read_model, read_trajectories};

fn ccpirl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccpirl")).args(args).env_remove("CCPIRL_SEED").output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = ccpirl(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn setup(dir: &Path, env: &str, n: &str, seed: &str) {
    ok(&["gen-env", "--env", env, "--n", n, "--seed", seed, "--dir", s(dir)]);
    ok(&["gen-experts", "--dir", s(dir), "--n-trajectories", "10"]);
}

#[test]
fn gen_env_writes_valid_files() {
    let t = tempfile::tempdir().unwrap();
    ok(&["gen-env", "--env", "fixed", "--n", "8", "--seed", "7", "--dir", s(t.path())]);
    for f in ["model.json", "true_reward.json", "features.csv", "config.json"] {
        assert!(t.path().join(f).exists(), "{f}");
    }
    let model = read_model(fs::File::open(t.path().join("model.json")).unwrap()).unwrap();
    ensure_valid(&model).unwrap();
    assert_eq!(model.n_states(), 64);
    let truth = read_true_reward(fs::File::open(t.path().join("true_reward.json")).unwrap()).unwrap();
    assert_eq!(truth.values().len(), 64);
    let features = fs::read_to_string(t.path().join("features.csv")).unwrap();
    assert_eq!(features.lines().next().unwrap(), "state,f0,f1");
    assert_eq!(features.lines().count(), 65);
}

#[test]
fn gen_env_is_byte_identical_across_runs() {
    let files = ["model.json", "true_reward.json", "features.csv", "config.json"];
    let args = |d: &Path| ["gen-env", "--env", "objectworld", "--n", "6", "--seed", "3", "--dir", s(d)].map(String::from);
    let a = tempfile::tempdir().unwrap();
    let run = |d: &Path| ok(&args(d).iter().map(String::as_str).collect::<Vec<_>>());
    run(a.path());
    let first: Vec<_> = files.iter().map(|f| fs::read(a.path().join(f)).unwrap()).collect();
    run(a.path());
    for (f, bytes) in files.iter().zip(&first) {
        assert_eq!(&fs::read(a.path().join(f)).unwrap(), bytes, "{f}");
    }
    // A different directory changes only the recorded output_dir.
    let b = tempfile::tempdir().unwrap();
    run(b.path());
    for f in &files[..3] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let fp = |d: &Path| {
        let v: serde_json::Value = serde_json::from_slice(&fs::read(d.join("config.json")).unwrap()).unwrap();
        v["fingerprint"].clone()
    };
    assert_eq!(fp(a.path()), fp(b.path()));
}

#[test]
fn invalid_size_exits_2_naming_the_field() {
    let t = tempfile::tempdir().unwrap();
    let out = ccpirl(&["gen-env", "--env", "fixed", "--n", "0", "--seed", "1", "--dir", s(t.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n:"));
}

#[test]
fn missing_seed_is_an_input_error_unless_env_var_set() {
    let t = tempfile::tempdir().unwrap();
    let out = ccpirl(&["gen-env", "--dir", s(t.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));

    let out = Command::new(env!("CARGO_BIN_EXE_ccpirl"))
        .args(["gen-env", "--n", "4", "--dir", s(t.path())])
        .env("CCPIRL_SEED", "12")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(fs::read_to_string(t.path().join("config.json")).unwrap().contains("\"seed\": 12"));
}

#[test]
fn gen_experts_count_seed_and_round_trip() {
    let t = tempfile::tempdir().unwrap();
    setup(t.path(), "macro", "6", "4");
    let path = t.path().join("trajectories.json");
    let first = fs::read(&path).unwrap();
    let demos = read_trajectories(first.as_slice()).unwrap();
    assert_eq!(demos.len(), 10);
    assert!(demos.iter().all(|d| d.len() == 6));
    let mut again = vec![];
    ccp_irl::model::write_trajectories(&mut again, &demos).unwrap();
    assert_eq!(again, first);

    ok(&["gen-experts", "--dir", s(t.path()), "--seed", "5"]);
    assert_ne!(fs::read(&path).unwrap(), first);
}

#[test]
fn gen_experts_without_model_exits_2() {
    let t = tempfile::tempdir().unwrap();
    let out = ccpirl(&["gen-experts", "--dir", s(t.path()), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model"));
}

#[test]
fn estimate_ccp_writes_normalized_table() {
    let t = tempfile::tempdir().unwrap();
    setup(t.path(), "fixed", "5", "2");
    ok(&["estimate-ccp", "--dir", s(t.path())]);
    let (ccp, smoothing) = ccp_irl::ccp::read_ccp(fs::File::open(t.path().join("ccp.json")).unwrap()).unwrap();
    assert!(smoothing.is_some());
    for row in ccp.probs().rows() {
        assert!((row.sum() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn train_writes_one_row_per_iteration() {
    let t = tempfile::tempdir().unwrap();
    setup(t.path(), "fixed", "5", "2");
    ok(&["train", "--dir", s(t.path()), "--algo", "ccp", "--iters", "5"]);
    let report = fs::read_to_string(t.path().join("report.csv")).unwrap();
    assert_eq!(report.lines().next().unwrap(), "iteration,nll,grad_norm,dp_seconds,total_seconds");
    assert_eq!(report.lines().count(), 6);
    let grid = fs::read_to_string(t.path().join("reward_grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 5);
    assert!(grid.lines().all(|l| l.split(',').count() == 5));
    let ckpt = read_checkpoint(fs::File::open(t.path().join("checkpoint.json")).unwrap()).unwrap();
    assert_eq!(ckpt.iteration, 5);
    assert!(ckpt.fingerprint.is_some());
}

#[test]
fn both_algorithms_reach_the_quality_band() {
    let t = tempfile::tempdir().unwrap();
    ok(&["gen-env", "--env", "fixed", "--n", "8", "--seed", "1", "--dir", s(t.path())]);
    ok(&["gen-experts", "--dir", s(t.path()), "--n-trajectories", "64"]);
    for algo in ["maxent", "ccp"] {
        ok(&["train", "--dir", s(t.path()), "--algo", algo, "--iters", "50"]);
        ok(&["eval", "--dir", s(t.path())]);
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.path().join("eval.json")).unwrap()).unwrap();
        let (evd, uniform) = (v["evd"].as_f64().unwrap(), v["uniform_evd"].as_f64().unwrap());
        assert!(evd.is_finite() && evd <= 0.2 * uniform, "{algo}: {evd} vs uniform {uniform}");
    }
}

#[test]
fn resumed_training_matches_uninterrupted() {
    let t = tempfile::tempdir().unwrap();
    setup(t.path(), "fixed", "5", "9");
    for algo in ["maxent", "ccp"] {
        ok(&["train", "--dir", s(t.path()), "--algo", algo, "--iters", "6"]);
        let straight = read_checkpoint(fs::File::open(t.path().join("checkpoint.json")).unwrap()).unwrap();
        ok(&["train", "--dir", s(t.path()), "--algo", algo, "--iters", "2"]);
        ok(&["train", "--dir", s(t.path()), "--algo", algo, "--iters", "6", "--resume"]);
        let resumed = read_checkpoint(fs::File::open(t.path().join("checkpoint.json")).unwrap()).unwrap();
        assert_eq!(resumed.iteration, 6);
        assert_eq!(resumed.params, straight.params, "{algo}");
    }
    let out = ccpirl(&["train", "--dir", s(t.path()), "--algo", "maxent", "--iters", "6", "--resume"]);
    assert_eq!(out.status.code(), Some(2), "algorithm mismatch with the ccp checkpoint");
}

#[test]
fn mlp_training_from_the_cli() {
    let t = tempfile::tempdir().unwrap();
    setup(t.path(), "objectworld", "5", "3");
    ok(&["train", "--dir", s(t.path()), "--algo", "ccp", "--reward-model", "mlp", "--iters", "3"]);
    let ckpt = read_checkpoint(fs::File::open(t.path().join("checkpoint.json")).unwrap()).unwrap();
    assert!(matches!(ckpt.params, RewardParams::Mlp(_)));
    assert!(matches!(ckpt.optimizer, ccp_irl::irl::OptimizerState::Adam(_)));
}

fn write_ckpt(dir: &Path, theta: Vec<f64>) {
    let c = Checkpoint {
        algorithm: Algorithm::Ccp,
        iteration: 0,
        params: RewardParams::Linear(LinearReward { theta }),
        optimizer: OptimizerConfig::default().start(0),
        seed: None,
        fingerprint: None,
    };
    write_checkpoint(fs::File::create(dir.join("checkpoint.json")).unwrap(), &c).unwrap();
}

fn eval_json(dir: &Path) -> serde_json::Value {
    ok(&["eval", "--dir", s(dir)]);
    serde_json::from_str(&fs::read_to_string(dir.join("eval.json")).unwrap()).unwrap()
}

#[test]
fn eval_of_true_reward_has_zero_evd() {
    let t = tempfile::tempdir().unwrap();
    setup(t.path(), "macro", "6", "8");
    // Region indicators span the macro-cell reward, so region rewards are the true weights.
    let model = read_model(fs::File::open(t.path().join("model.json")).unwrap()).unwrap();
    let truth = read_true_reward(fs::File::open(t.path().join("true_reward.json")).unwrap()).unwrap();
    let f = model.features().values();
    let theta: Vec<f64> =
        (0..f.ncols()).map(|k| (0..f.nrows()).find(|&s| f[[s, k]] == 1.0).map_or(0.0, |s| truth.values()[s])).collect();
    write_ckpt(t.path(), theta);
    let v = eval_json(t.path());
    assert!(v["evd"].as_f64().unwrap().abs() < 1e-6, "{v}");
}

#[test]
fn eval_of_zero_reward_is_uniform() {
    let t = tempfile::tempdir().unwrap();
    setup(t.path(), "fixed", "5", "8");
    write_ckpt(t.path(), vec![0.0, 0.0]);
    let v = eval_json(t.path());
    let held = read_trajectories(fs::File::open(t.path().join("held_out.json")).unwrap()).unwrap();
    let mean_len = held.iter().map(|h| h.len()).sum::<usize>() as f64 / held.len() as f64;
    let want = mean_len * 4f64.ln();
    assert!((v["nll"].as_f64().unwrap() - want).abs() < 1e-9, "{v} vs {want}");
}

#[test]
fn eval_json_schema() {
    let t = tempfile::tempdir().unwrap();
    setup(t.path(), "fixed", "4", "1");
    ok(&["train", "--dir", s(t.path()), "--algo", "maxent", "--iters", "2"]);
    let v = eval_json(t.path());
    let obj = v.as_object().unwrap();
    for key in ["nll", "evd", "soft_evd", "uniform_evd"] {
        assert!(obj[key].is_f64(), "{key}");
    }
    assert_eq!(obj["n_eval_trajectories"].as_u64(), Some(20));
    assert_eq!(obj["fingerprint"].as_str().unwrap().len(), 64);
    assert!(v["nll"].as_f64().unwrap() >= 0.0);
}

#[test]
fn eval_without_checkpoint_exits_2() {
    let t = tempfile::tempdir().unwrap();
    setup(t.path(), "fixed", "4", "1");
    assert_eq!(ccpirl(&["eval", "--dir", s(t.path())]).status.code(), Some(2));
}

#[test]
fn bench_smoke_suite() {
    let t = tempfile::tempdir().unwrap();
    let suite = t.path().join("suite.json");
    fs::write(
        &suite,
        r#"{"name": "smoke", "iterations": 2, "repeats": 1,
            "cells": [{"env": {"kind": "fixed-target", "n": 4}, "trajectories": [5]}]}"#,
    )
    .unwrap();
    let out_dir = t.path().join("out");
    ok(&["bench", "--suite", s(&suite), "--out", s(&out_dir)]);
    let csv = fs::read_to_string(out_dir.join("bench.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "algorithm,env,n_states,n_actions,beta,iterations,trajectories,setup_s,total_s,nll,evd,seed,repeat");
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("maxent,") && rows[1].starts_with("ccp,"));
    let summary = fs::read_to_string(out_dir.join("bench_summary.csv")).unwrap();
    assert!(summary.lines().next().unwrap().ends_with("speedup"));
    let cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("bench_config.json")).unwrap()).unwrap();
    assert_eq!(cfg["suite"]["name"], "smoke");
    assert!(cfg["failures"].as_array().unwrap().is_empty());
}

#[test]
fn bench_requires_a_suite() {
    assert_eq!(ccpirl(&["bench"]).status.code(), Some(2));
    assert_eq!(ccpirl(&["bench", "--preset", "nope"]).status.code(), Some(2));
}

#[test]
fn config_file_drives_a_run_and_flags_override() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("exp.json");
    fs::write(&cfg, r#"{"env": {"kind": "macro-cell", "n": 6, "macro_size": 3}, "seed": 21, "n_trajectories": 7}"#).unwrap();
    let run = t.path().join("run");
    ok(&["gen-env", "--config", s(&cfg), "--dir", s(&run)]);
    ok(&["gen-experts", "--dir", s(&run), "--held-out", "0"]);
    let demos = read_trajectories(fs::File::open(run.join("trajectories.json")).unwrap()).unwrap();
    assert_eq!(demos.len(), 7);
    assert!(!run.join("held_out.json").exists());
    let saved: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("config.json")).unwrap()).unwrap();
    let env: EnvSpec = serde_json::from_value(saved["env"].clone()).unwrap();
    assert_eq!(env.side(), 6);
    assert_eq!(saved["seed"], 21);
    assert_eq!(saved["fingerprint"].as_str().unwrap().len(), 64);
}

#[test]
fn help_and_version_exit_zero() {
    assert!(ccpirl(&["--help"]).status.success());
    assert!(ccpirl(&["--version"]).status.success());
    assert_eq!(ccpirl(&["frobnicate"]).status.code(), Some(2));
}
