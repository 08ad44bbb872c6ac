use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hkdyn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hkdyn"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_writes_trajectory_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("three.json"),
        r#"{"positions": [0, 0.5, 1.0]}"#,
    )
    .unwrap();
    let o = hkdyn(
        dir.path(),
        &[
            "simulate",
            "--model",
            "classical",
            "--init",
            "file:three.json",
            "--steps",
            "10",
            "--out",
            "t.jsonl",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("t.jsonl")).unwrap();
    assert!(text.lines().count() <= 11);
    assert_eq!(
        text.lines().nth(1),
        Some(r#"{"t":1,"positions":[0.5,0.5,0.5]}"#)
    );
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("t.jsonl.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["steps"], 10);
    assert_eq!(meta["model"], "classical");
}

#[test]
fn simulate_threshold_stops_early() {
    let dir = tempfile::tempdir().unwrap();
    let o = hkdyn(
        dir.path(),
        &[
            "simulate",
            "--model",
            "social",
            "--graph",
            "path:3",
            "--init",
            "uniform:3,0,1,5",
            "--threshold",
            "1e-6",
            "--out",
            "t.jsonl",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("movement below threshold"));
}

#[test]
fn simulate_spectral_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = hkdyn(
        dir.path(),
        &[
            "simulate",
            "--model",
            "social",
            "--graph",
            "gnp:20,0.3",
            "--seed",
            "4",
            "--init",
            "uniform:20,0,8,1",
            "--steps",
            "15",
            "--spectral",
            "--report",
            "r.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("t,energy,active_energy,lambda,gap_bound,decrement,guaranteed_decrement,total_movement,diameter,components")
    );
    let energies: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(energies.len(), 15);
    assert!(energies.windows(2).all(|w| w[1] <= w[0] + 1e-9));
}

#[test]
fn simulate_nd_with_noise_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("two.json"), r#"{"positions": [0, 0.9]}"#).unwrap();
    fs::write(
        dir.path().join("noise.json"),
        r#"{"eps": 0.1, "mode": "per-agent", "values": {"0,1": 0.1, "0,2": 0.1}}"#,
    )
    .unwrap();
    let o = hkdyn(
        dir.path(),
        &[
            "simulate",
            "--model",
            "nd",
            "--init",
            "file:two.json",
            "--noise",
            "file:noise.json",
            "--steps",
            "1",
            "--out",
            "t.jsonl",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("t.jsonl")).unwrap();
    let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    let x: Vec<f64> = serde_json::from_value(last["positions"].clone()).unwrap();
    assert!((x[0] - 0.495).abs() < 1e-12 && (x[1] - 0.405).abs() < 1e-12);
}

#[test]
fn unfriendly_schedule_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let full = r#"{"n": 2, "edges": [[1, 2]]}"#;
    let none = r#"{"n": 2, "edges": []}"#;
    fs::write(
        dir.path().join("sched.json"),
        format!(r#"{{"friendly": true, "graphs": [{full}, {none}]}}"#),
    )
    .unwrap();
    let args = [
        "simulate",
        "--model",
        "social",
        "--schedule",
        "sched.json",
        "--init",
        "uniform:2,0,0.5,1",
        "--steps",
        "3",
    ];
    let o = hkdyn(dir.path(), &args);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not friendly at t=0"), "{}", stderr(&o));
    let mut allow = args.to_vec();
    allow.push("--allow-unfriendly");
    let o = hkdyn(dir.path(), &allow);
    assert!(o.status.success());
    assert!(stdout(&o).contains("unfriendly transition at t=0: lost edges [(1, 2)]"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 6] = [
        &["simulate", "--init", "uniform:3,0,1"],
        &["simulate", "--model", "social", "--init", "uniform:3,0,1,1"],
        &[
            "simulate",
            "--model",
            "classical",
            "--graph",
            "path:3",
            "--init",
            "uniform:3,0,1,1",
        ],
        &["simulate", "--model", "nd", "--init", "uniform:3,0,1,1"],
        &[
            "simulate",
            "--model",
            "nd",
            "--noise",
            "uniform:1",
            "--init",
            "uniform:3,0,1,1",
        ],
        &["simulate", "--init", "file:missing.json"],
    ];
    for args in cases {
        let o = hkdyn(dir.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
    let o = hkdyn(dir.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    let o = hkdyn(dir.path(), &["--help"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn check_nd_lemmas_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = hkdyn(
        dir.path(),
        &[
            "check",
            "--suite",
            "nd-lemmas",
            "--n",
            "10",
            "--eps",
            "auto",
            "--trials",
            "100",
            "--seed",
            "7",
            "--out",
            "v.json",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("eps=1.25e-3"));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("v.json")).unwrap()).unwrap();
    assert_eq!(v["violations"].as_array().unwrap().len(), 0);
    assert!(v["checked"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c == "min-max"));
    let cases = &v["case_histogram"];
    let total: u64 = ["S1", "S2", "S3"]
        .iter()
        .map(|k| cases[k].as_u64().unwrap())
        .sum();
    assert_eq!(total, 100 * 500);
}

#[test]
fn check_other_suites_pass() {
    let dir = tempfile::tempdir().unwrap();
    for suite in ["energy", "gap"] {
        let o = hkdyn(
            dir.path(),
            &[
                "check", "--suite", suite, "--n", "15", "--trials", "20", "--steps", "50",
            ],
        );
        assert_eq!(o.status.code(), Some(0), "{suite}: {}", stdout(&o));
    }
    let o = hkdyn(
        dir.path(),
        &[
            "check",
            "--suite",
            "nd-lemmas",
            "--model",
            "nd-pairwise",
            "--trials",
            "10",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn check_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "check",
        "--suite",
        "nd-lemmas",
        "--n",
        "6",
        "--trials",
        "8",
        "--seed",
        "3",
    ];
    assert_eq!(
        stdout(&hkdyn(dir.path(), &args)),
        stdout(&hkdyn(dir.path(), &args))
    );
}

#[test]
fn demo_nondet_shows_swap() {
    let dir = tempfile::tempdir().unwrap();
    let o = hkdyn(dir.path(), &["demo", "nondet", "--eps", "0.1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(
        out.contains("[0.0, 0.9]") && out.contains("[0.495, 0.405]"),
        "{out}"
    );
}

#[test]
fn every_demo_verifies() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ["nofrz", "initdep", "noorder", "nondet"] {
        let o = hkdyn(dir.path(), &["demo", kind, "--out", "d.jsonl"]);
        assert!(o.status.success(), "{kind}: {}", stdout(&o));
        assert!(stdout(&o).contains("verified"));
    }
    let o = hkdyn(dir.path(), &["demo", "initdep", "--delta", "0.1,0.01"]);
    assert!(stdout(&o).contains("delta=1e-2"));
}

#[test]
fn sweep_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "sweep",
        "--n",
        "20,30",
        "--p-grid",
        "0.1,0.5,1",
        "--trials",
        "3",
        "--seed",
        "9",
        "--out",
        "r.csv",
        "--report",
        "a.csv",
    ];
    assert!(hkdyn(dir.path(), &args).status.success());
    let first = fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert!(hkdyn(dir.path(), &args).status.success());
    assert_eq!(first, fs::read_to_string(dir.path().join("r.csv")).unwrap());
    assert!(first.starts_with("n,p,trial,seed,convergence_time,converged\n"));
    assert_eq!(first.lines().count(), 1 + 2 * 3 * 3);
    let agg = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert!(agg.starts_with("n,p,mean_time,std_time,num_converged,num_capped\n"));
    assert_eq!(agg.lines().count(), 1 + 2 * 3);
    assert!(dir.path().join("r.csv.meta.json").exists());
}

#[test]
fn sweep_from_spec_file_and_budget() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("spec.json"),
        r#"{"n_list": [12], "m_list": [1, 2], "graph_model": "ba", "trials": 2, "master_seed": 1}"#,
    )
    .unwrap();
    let o = hkdyn(dir.path(), &["sweep", "--spec", "spec.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
    let o = hkdyn(dir.path(), &["sweep", "--n", "10000", "--trials", "1000"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("exceeds budget"));
}

#[test]
fn spectral_report_of_a_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = hkdyn(
        dir.path(),
        &[
            "spectral-report",
            "--init",
            "uniform:3,0,0.001,1",
            "--graph",
            "path:3",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((r["lambda"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((r["gap_bound"].as_f64().unwrap() - 17.0 / 18.0).abs() < 1e-12);
    let o = hkdyn(
        dir.path(),
        &[
            "spectral-report",
            "--init",
            "uniform:8,0,4,1",
            "--steps",
            "5",
            "--out",
            "s.csv",
        ],
    );
    assert!(o.status.success());
    assert_eq!(
        fs::read_to_string(dir.path().join("s.csv"))
            .unwrap()
            .lines()
            .count(),
        6
    );
}
