use std::path::PathBuf;
use std::process::Command as Process;

use axppo_cli::{parse_cli, Command};
use axppo_core::sweep::{DEFAULT_COEFFICIENTS, DEFAULT_TAUS};
use axppo_core::{Mode, TrainConfig};

#[test]
fn train_flags_map_onto_config() {
    let cmd = parse_cli([
        "axppo",
        "train",
        "--algo",
        "adaptive",
        "--entropy-coef",
        "0.5",
        "--tau",
        "50",
        "--seed",
        "3",
        "--total-steps",
        "60000",
        "--out",
        "runs/x",
    ])
    .unwrap();
    let Command::Train { config, out } = cmd else {
        panic!("expected train, got {cmd:?}");
    };
    assert_eq!(out, PathBuf::from("runs/x"));
    assert_eq!(
        config,
        TrainConfig {
            mode: Mode::Adaptive,
            c2_base: 0.5,
            tau: 50,
            seed: 3,
            total_env_steps: 60_000,
            ..TrainConfig::default()
        }
    );
    assert_eq!(config.update_count(), 234);
}

#[test]
fn train_defaults() {
    let Command::Train { config, out } = parse_cli(["axppo", "train"]).unwrap() else {
        panic!("expected train");
    };
    assert_eq!(config, TrainConfig::default());
    assert_eq!(out, PathBuf::from("runs/train"));
}

#[test]
fn sweep_defaults_cover_full_grid() {
    let Command::Sweep(spec) = parse_cli(["axppo", "sweep", "--jobs", "4"]).unwrap() else {
        panic!("expected sweep");
    };
    assert_eq!(spec.coefficient_grid, DEFAULT_COEFFICIENTS);
    assert_eq!(spec.tau_grid, DEFAULT_TAUS);
    assert_eq!(spec.seeds_per_cell, 3);
    assert_eq!(spec.parallelism, 4);
    assert_eq!(spec.output_dir, PathBuf::from("results"));
    assert_eq!(spec.plan().len(), 87);
}

#[test]
fn sweep_lists_parse() {
    let Command::Sweep(spec) = parse_cli([
        "axppo",
        "sweep",
        "--coefs",
        "0.1,0.8",
        "--taus",
        "50",
        "--seeds",
        "2",
        "--no-standard",
    ])
    .unwrap() else {
        panic!("expected sweep");
    };
    assert_eq!(spec.coefficient_grid, vec![0.1, 0.8]);
    assert_eq!(spec.tau_grid, vec![50]);
    assert!(!spec.include_standard);
    assert_eq!(spec.plan().len(), 4);
}

#[test]
fn eval_flags() {
    let cmd = parse_cli(["axppo", "eval", "--checkpoint", "a.ckpt", "--episodes", "5"]).unwrap();
    assert_eq!(
        cmd,
        Command::Eval {
            checkpoint: PathBuf::from("a.ckpt"),
            episodes: 5,
            seed: 0
        }
    );
}

#[test]
fn bad_arguments_rejected() {
    assert!(parse_cli(["axppo", "train", "--algo", "bogus"]).is_err());
    assert!(parse_cli(["axppo", "train", "--lr", "0.1"]).is_err());
    assert!(parse_cli(["axppo", "sweep", "--taus", "1,x"]).is_err());
    assert!(parse_cli(["axppo", "eval"]).is_err());
    assert!(parse_cli(["axppo"]).is_err());
}

fn axppo() -> Process {
    Process::new(env!("CARGO_BIN_EXE_axppo"))
}

#[test]
fn binary_trains_then_evaluates_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = axppo()
        .args([
            "train",
            "--algo",
            "adaptive",
            "--entropy-coef",
            "0.3",
            "--tau",
            "2",
            "--total-steps",
            "512",
        ])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let log = std::fs::read_to_string(out.join("log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);

    let eval = axppo()
        .args(["eval", "--episodes", "2", "--checkpoint"])
        .arg(out.join("params.ckpt"))
        .output()
        .unwrap();
    assert!(eval.status.success());
    assert!(String::from_utf8_lossy(&eval.stdout).contains("over 2 episodes"));
}

#[test]
fn binary_sweep_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let result = axppo()
        .args([
            "sweep",
            "--coefs",
            "0,0.5",
            "--taus",
            "1",
            "--seeds",
            "1",
            "--total-steps",
            "256",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let table = std::fs::read_to_string(dir.path().join("table.md")).unwrap();
    assert!(table.contains("| axPPO τ = 1 | - |"));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("runs.csv"))
            .unwrap()
            .lines()
            .count(),
        4
    );
    assert!(dir.path().join("logs/run_adaptive_0.5_1_0.csv").exists());
}

#[test]
fn binary_reports_missing_checkpoint() {
    let out = axppo()
        .args(["eval", "--checkpoint", "/nonexistent/params.ckpt"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}
