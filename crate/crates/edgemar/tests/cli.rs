//! Binary surface tests: flags, exit codes, emitted files.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use edgemar::formats::{load_checkpoint, read_plans, read_requests, read_topology};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgemar"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(
        &path,
        r#"{ "seed": 3, "train": { "epochs": 2, "hidden": 6 } }"#,
    )
    .unwrap();
    path
}

#[test]
fn generate_writes_readable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path());
    let out = run(dir.path(), &["generate", "--config", "config.json", "--out", "g"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let t = read_topology(&dir.path().join("g/topology.json")).unwrap();
    assert_eq!(t.active_ecs().len(), 6);
    let rs = read_requests(&dir.path().join("g/requests.jsonl")).unwrap();
    assert_eq!(rs.len(), 30);
    for r in &rs {
        r.validate(&t).unwrap();
    }
}

#[test]
fn solve_emits_plans_and_a_manifest_per_scheme() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path());
    for scheme in ["optim", "cfs"] {
        let out = run(
            dir.path(),
            &["solve", "--scheme", scheme, "--config", "config.json", "--out", "s"],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }

    let optim = read_plans(&dir.path().join("s/plans_optim.jsonl")).unwrap();
    let cfs = read_plans(&dir.path().join("s/plans_cfs.jsonl")).unwrap();
    assert_eq!(optim.len(), 30);
    assert_eq!(cfs.len(), 30);

    let objective = |name: &str| -> f64 {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["objectiveMs"].as_f64().unwrap()
    };
    let opt = objective("s/manifest_optim.json");
    let greedy = objective("s/manifest_cfs.json");
    assert!(opt <= greedy, "optimal {opt} exceeds greedy {greedy}");
}

#[test]
fn train_from_plan_files_writes_a_loadable_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path());
    let out = run(
        dir.path(),
        &["solve", "--scheme", "optim", "--config", "config.json", "--out", "s"],
    );
    assert!(out.status.success());

    let out = run(
        dir.path(),
        &[
            "train",
            "--dataset",
            "s/plans_optim.jsonl",
            "--config",
            "config.json",
            "--out",
            "t",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let (model, cfg, master) = load_checkpoint(&dir.path().join("t/checkpoint.json")).unwrap();
    assert_eq!(master, 3);
    assert_eq!(cfg.max_epochs, 2);
    assert_eq!(model.hidden, 6);
    let trace = std::fs::read_to_string(dir.path().join("t/trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 3);
    assert!(trace.starts_with("epoch,loss,trainAccPct,valAccPct\n"));
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path());
    for (out, seed) in [("a", "5"), ("b", "5"), ("c", "6")] {
        let res = run(
            dir.path(),
            &["generate", "--config", "config.json", "--seed", seed, "--out", out],
        );
        assert!(res.status.success());
    }
    let bytes = |p: &str| std::fs::read(dir.path().join(p)).unwrap();
    assert_eq!(bytes("a/requests.jsonl"), bytes("b/requests.jsonl"));
    assert_ne!(bytes("a/requests.jsonl"), bytes("c/requests.jsonl"));
}

#[test]
fn bad_usage_exits_2_with_json_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path());

    let cases: [&[&str]; 3] = [
        &["sweep", "--axis", "foo", "--config", "config.json"],
        &["solve", "--scheme", "foo", "--config", "config.json"],
        &["generate"],
    ];
    for args in cases {
        let out = run(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "args {args:?}");
        let stderr = String::from_utf8(out.stderr).unwrap();
        let v: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
        assert_eq!(v["error"]["kind"], "usage", "args {args:?}");
    }
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("config.json"), r#"{ "sed": 3 }"#).unwrap();
    let out = run(dir.path(), &["generate", "--config", "config.json"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let v: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert_eq!(v["error"]["kind"], "config");
}
