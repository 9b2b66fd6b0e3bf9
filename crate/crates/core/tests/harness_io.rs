use gosprl::agent::AgentRegistry;
use gosprl::harness::{
    mean, read_runs_csv, run_experiment, summarize_rows, write_results, ExperimentConfig, ResultSet, RunOptions,
    RUNS_HEADER,
};

fn config(json: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(json).unwrap()
}

#[test]
fn empty_result_set_writes_header_only() {
    let cfg = config(
        r#"{"environment": "riverswim:3", "algorithm": "random",
            "requirement": {"kind": "treasure", "k": 1}, "seeds": [0]}"#,
    );
    let dir = tempfile::tempdir().unwrap();
    write_results(&ResultSet::empty(cfg), dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    assert_eq!(csv.trim_end(), RUNS_HEADER.join(","));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"], 0);
    assert_eq!(summary["capped"], 0);
    assert_eq!(summary["algorithms"][0]["tau"]["runs"], 0);
    assert!(summary["algorithms"][0]["tau"]["mean"].is_null());
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 40);
}

#[test]
fn single_state_random_run_stops_at_three() {
    let cfg = config(
        r#"{"environment": {"kind": "explicit", "kernel": [[[1.0]]], "start": 0},
            "algorithm": "random", "requirement": {"kind": "treasure", "k": 3}, "seeds": [7]}"#,
    );
    let rs = run_experiment(&cfg, &AgentRegistry::default(), RunOptions::default()).unwrap();
    assert_eq!(rs.traces.len(), 1);
    assert_eq!(rs.traces[0].tau, Some(3));
}

#[test]
fn three_logged_points_give_three_metric_rows_and_one_tau_row() {
    // single state, b = 20, logging every 10 steps: points at t = 0, 10, 20
    let cfg = config(
        r#"{"environment": {"kind": "explicit", "kernel": [[[1.0]]], "start": 0},
            "algorithm": "random", "requirement": {"kind": "treasure", "k": 20}, "seeds": [0]}"#,
    );
    let rs = run_experiment(&cfg, &AgentRegistry::default(), RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_results(&rs, dir.path()).unwrap();
    let rows = read_runs_csv(&dir.path().join("runs.csv")).unwrap();
    assert_eq!(rows.iter().filter(|r| r.metric == "P_t").count(), 3);
    assert_eq!(rows.iter().filter(|r| r.metric == "tau").count(), 1);
    let visits: f64 = rows.iter().filter(|r| r.metric == "visits").map(|r| r.value).sum();
    assert_eq!(visits, 20.0);
}

#[test]
fn reruns_are_byte_identical_and_parallelism_is_invisible() {
    let cfg = config(
        r#"{"environment": "riverswim:4", "algorithms": [{"id": "gosprl"}, {"id": "ucrl_zero_one"}],
            "requirement": {"kind": "treasure", "k": 3}, "seeds": [0, 1, 2, 3], "alpha_p": 0.1}"#,
    );
    let reg = AgentRegistry::default();
    let mut outputs = Vec::new();
    for workers in [Some(1), Some(3), None] {
        let rs = run_experiment(
            &cfg,
            &reg,
            RunOptions {
                workers,
                seed_offset: 0,
            },
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_results(&rs, dir.path()).unwrap();
        outputs.push((
            std::fs::read(dir.path().join("runs.csv")).unwrap(),
            std::fs::read(dir.path().join("summary.json")).unwrap(),
        ));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn seed_offset_shifts_seeds() {
    let cfg = config(
        r#"{"environment": "riverswim:3", "algorithm": "random",
            "requirement": {"kind": "treasure", "k": 1}, "seeds": [0, 1]}"#,
    );
    let rs = run_experiment(
        &cfg,
        &AgentRegistry::default(),
        RunOptions {
            workers: Some(1),
            seed_offset: 100,
        },
    )
    .unwrap();
    let seeds: Vec<u64> = rs.traces.iter().map(|t| t.seed).collect();
    assert_eq!(seeds, vec![100, 101]);
}

#[test]
fn summary_mean_matches_independent_recomputation() {
    let cfg = config(
        r#"{"environment": "riverswim:6", "algorithm": {"id": "gosprl_known"},
            "requirement": {"kind": "treasure", "k": 10}, "seeds": [0,1,2,3,4,5,6,7,8,9,10,11,12,13,14,15,16,17,18,19,20,21,22,23,24,25,26,27,28,29],
            "alpha_p": 0.1, "log_every": 50}"#,
    );
    let rs = run_experiment(&cfg, &AgentRegistry::default(), RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_results(&rs, dir.path()).unwrap();

    // recompute from the raw CSV text
    let text = std::fs::read_to_string(dir.path().join("runs.csv")).unwrap();
    let taus: Vec<f64> = text
        .lines()
        .skip(1)
        .filter_map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            (cols[5] == "tau").then(|| cols[6].parse().unwrap())
        })
        .collect();
    assert_eq!(taus.len(), 30);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let reported = summary["algorithms"][0]["tau"]["mean"].as_f64().unwrap();
    assert!((reported - mean(&taus)).abs() < 1e-9);

    let rows = read_runs_csv(&dir.path().join("runs.csv")).unwrap();
    let by_algo = summarize_rows(&rows);
    assert!((by_algo["gosprl_known"].mean.unwrap() - reported).abs() < 1e-9);

    // visit increments of every trace sum to its stopping time
    for trace in &rs.traces {
        let v: u64 = trace.series.iter().map(|p| p.visits).sum();
        assert_eq!(Some(v), trace.tau);
    }
}

#[test]
fn capped_runs_are_reported_separately() {
    let cfg = config(
        r#"{"environment": "riverswim:6", "algorithm": "random",
            "requirement": {"kind": "treasure", "k": 10}, "seeds": [0, 1], "step_cap": 50}"#,
    );
    let rs = run_experiment(&cfg, &AgentRegistry::default(), RunOptions::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_results(&rs, dir.path()).unwrap();
    let rows = read_runs_csv(&dir.path().join("runs.csv")).unwrap();
    let s = &summarize_rows(&rows)["random"];
    assert_eq!((s.runs, s.completed, s.capped), (2, 0, 2));
    assert_eq!(s.mean, None);
}

#[test]
fn bad_paths_carry_context() {
    let err = ExperimentConfig::from_path(std::path::Path::new("/nonexistent/exp.json")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/exp.json"), "{err}");
}
