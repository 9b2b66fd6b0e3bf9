use std::process::Command;

fn gosprl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gosprl"))
}

#[test]
fn env_info_prints_diameter() {
    let out = gosprl().args(["env-info", "--env", "riverswim:6"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("S  6"));
    assert!(text.contains("A  2"));
    assert!(text.contains("D  14.72"), "{text}");
}

#[test]
fn run_then_metrics_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    std::fs::write(
        &cfg,
        r#"{"environment": "riverswim:4", "algorithms": [{"id": "gosprl"}, {"id": "random"}],
            "requirement": {"kind": "treasure", "k": 2}, "seeds": [0, 1, 2]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let status = gosprl()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .args(["--workers", "2"])
        .status()
        .unwrap();
    assert!(status.success());
    let first = std::fs::read(out_dir.join("runs.csv")).unwrap();

    let out = gosprl().arg("metrics").arg("--csv").arg(out_dir.join("runs.csv")).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("gosprl,3,3,0,")), "{text}");
    assert!(text.lines().any(|l| l.starts_with("random,3,3,0,")), "{text}");

    // seed offset changes the trajectories, a rerun without it does not
    let shifted = dir.path().join("shifted");
    let status = gosprl()
        .env("GOSPRL_SEED_OFFSET", "1000")
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&shifted)
        .status()
        .unwrap();
    assert!(status.success());
    assert_ne!(std::fs::read(shifted.join("runs.csv")).unwrap(), first);
    let again = dir.path().join("again");
    gosprl().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&again).status().unwrap();
    assert_eq!(std::fs::read(again.join("runs.csv")).unwrap(), first);
}

#[test]
fn unknown_algorithm_fails_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    std::fs::write(
        &cfg,
        r#"{"environment": "riverswim:4", "algorithm": "nope",
            "requirement": {"kind": "treasure", "k": 2}, "seeds": [0]}"#,
    )
    .unwrap();
    let out = gosprl().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown algorithm"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn diameter_estimate_on_a_cycle() {
    let out = gosprl()
        .args([
            "diameter",
            "--env",
            r#"{"kind": "explicit", "kernel": [[[0,1,0]], [[0,0,1]], [[1,0,0]]]}"#,
            "--eps",
            "0.5",
            "--budget-scale",
            "0.01",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let est: f64 = text.lines().next().unwrap().split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((2.0..=7.5).contains(&est), "{text}");
}
