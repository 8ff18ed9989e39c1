//! End-to-end checks of the command-line interface: exit codes, golden CSV
//! schemas, determinism and the solve/simulate round trip.

use std::path::Path;
use std::process::{Command, Output};

use cogarq::closedform::{evaluate_m_policy, optimal_m, MPolicyParams};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cogarq"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn erasure_config(dir: &Path) -> std::path::PathBuf {
    write_config(
        dir,
        "erasure.json",
        r#"{
  "model": {"preset": "erasure", "p_ee": 0.99, "p_ne": 0.01},
  "objective": {"w": 0.6},
  "solver": {"grid_resolution": 257, "tolerance": 1e-9},
  "sim": {"horizon": 20000, "replications": 4},
  "policies": ["mpolicy", "always_transmit"],
  "w_grid": [0.3, 0.6, 0.9],
  "seed": 11
}"#,
    )
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn solve_reports_threshold_and_writes_policy() {
    let dir = tempfile::tempdir().unwrap();
    let config = erasure_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("threshold p_th ="), "stdout: {stdout}");
    let policy: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("policy.json")).unwrap())
            .unwrap();
    assert_eq!(policy["schema"], "cogarq-policy-v1");
    assert_eq!(policy["grid"]["domain"], "interval");
    assert_eq!(policy["grid"]["schema_version"], 1);
    let p_th = policy["threshold"]["Threshold"]["p_th"].as_f64().unwrap();
    assert!(p_th > 1.0 / 3.0 && p_th < 0.9934, "p_th = {p_th}");
    // Config embedded for provenance.
    assert_eq!(policy["config"]["seed"], 11);
}

#[test]
fn solve_reports_always_transmit_regime() {
    let dir = tempfile::tempdir().unwrap();
    let config = erasure_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--set",
        "objective.w=0.3",
    ]);
    assert_success(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("always"), "stdout: {stdout}");
}

#[test]
fn malformed_config_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "bad.json", "{ not json");
    let out_dir = dir.path().join("out");
    let out = run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.join("policy.json").exists());
}

#[test]
fn unknown_field_is_rejected_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "unknown.json",
        r#"{"model": {"preset": "erasure", "p_ee": 0.9, "p_ne": 0.1, "typo_field": 1}}"#,
    );
    let out = run(&["solve", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("typo_field") || stderr.contains("model"), "stderr: {stderr}");
}

#[test]
fn unknown_figure_exits_2_listing_names() {
    let out = run(&["figure", "fig99"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("fig4") && stderr.contains("fig13"), "stderr: {stderr}");
}

#[test]
fn simulate_csv_schema_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = erasure_config(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out_dir in [&out_a, &out_b] {
        let out = run(&[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ]);
        assert_success(&out);
    }
    let a = std::fs::read(out_a.join("simulate.csv")).unwrap();
    let b = std::fs::read(out_b.join("simulate.csv")).unwrap();
    assert_eq!(a, b, "same config and seed must produce identical bytes");

    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    let comment = lines.next().unwrap();
    assert!(comment.starts_with("# schema=cogarq-sweep-v1 config={"));
    assert_eq!(
        lines.next().unwrap(),
        "w,policy,r_p,r_s,r,stderr_r,horizon,replications,seed,version"
    );
    // always_transmit earns the secondary reward exactly.
    let tx_row: Vec<&str> = lines
        .clone()
        .find(|l| l.contains("always_transmit"))
        .unwrap()
        .split(',')
        .collect();
    assert_eq!(tx_row[2], "0");
    assert_eq!(tx_row[3], "1");
}

#[test]
fn simulate_with_cached_policy_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = erasure_config(dir.path());
    let out_dir = dir.path().join("out");
    assert_success(&run(&[
        "solve",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    let policy = out_dir.join("policy.json");
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--policy",
        policy.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_success(&out);
    let text = std::fs::read_to_string(out_dir.join("simulate.csv")).unwrap();
    assert!(text.lines().any(|l| l.starts_with("0.6,dp,")));

    let missing = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--policy",
        dir.path().join("nope.json").to_str().unwrap(),
    ]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn mpolicy_simulation_tracks_analytic_rate_within_one_percent() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "long.json",
        r#"{
  "model": {"preset": "erasure", "p_ee": 0.99, "p_ne": 0.01},
  "objective": {"w": 0.6},
  "sim": {"horizon": 1000000, "replications": 4},
  "policies": ["mpolicy"],
  "seed": 5
}"#,
    );
    let out_dir = dir.path().join("out");
    assert_success(&run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(out_dir.join("simulate.csv")).unwrap();
    let row: Vec<&str> = text
        .lines()
        .find(|l| l.starts_with("0.6,mpolicy,"))
        .unwrap()
        .split(',')
        .collect();
    let simulated: f64 = row[4].parse().unwrap();
    let params = MPolicyParams {
        p_ee: 0.99,
        p_ne: 0.01,
        w: 0.6,
        r_p: 1.0,
        r_s: 1.0,
    };
    let m = optimal_m(&params).unwrap().as_finite().unwrap();
    let analytic = evaluate_m_policy(m, &params).unwrap().r;
    let rel = (simulated - analytic).abs() / analytic;
    assert!(rel < 0.01, "relative gap {rel} at 1e6 slots");
}

#[test]
fn seed_override_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = erasure_config(dir.path());
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    assert_success(&run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
    ]));
    assert_success(&run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
        "--seed",
        "999",
    ]));
    let a = std::fs::read_to_string(out_a.join("simulate.csv")).unwrap();
    let b = std::fs::read_to_string(out_b.join("simulate.csv")).unwrap();
    assert_ne!(a, b);
    assert!(b.lines().nth(2).unwrap().contains(",999,"));
}

#[test]
fn optimal_m_and_rate_region_share_the_closedform_schema() {
    let dir = tempfile::tempdir().unwrap();
    let config = erasure_config(dir.path());
    let out_dir = dir.path().join("out");
    assert_success(&run(&[
        "optimal-m",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    assert_success(&run(&[
        "rate-region",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    for name in ["optimal_m.csv", "rate_region.csv"] {
        let text = std::fs::read_to_string(out_dir.join(name)).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "w,m_star,r_p,r_s,r");
        // w = 0.3 sits in the always-transmit regime.
        assert!(text.lines().any(|l| l.starts_with("0.3,inf,0,1,")));
    }
}

#[test]
fn fig5_flags_infinite_bursts_below_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "figure",
        "fig5",
        "--out",
        out_dir.to_str().unwrap(),
        "--set",
        "w_grid=[0.3,0.45,0.6,0.8]",
    ]);
    assert_success(&out);
    let text = std::fs::read_to_string(out_dir.join("fig5.csv")).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "w,m_star,m_greedy");
    assert!(text.lines().any(|l| l.starts_with("0.3,inf,inf")));
    assert!(text.lines().any(|l| l.starts_with("0.45,inf,inf")));
    let row_06: Vec<&str> = text
        .lines()
        .find(|l| l.starts_with("0.6,"))
        .unwrap()
        .split(',')
        .collect();
    assert_eq!(row_06[1], "20");
    assert_eq!(row_06[2], "inf");
    let row_08: Vec<&str> = text
        .lines()
        .find(|l| l.starts_with("0.8,"))
        .unwrap()
        .split(',')
        .collect();
    assert_ne!(row_08[1], "inf");
    assert_ne!(row_08[2], "inf");
}

#[test]
fn learn_writes_fit_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "learn.json",
        r#"{
  "model": {"preset": "erasure", "p_ee": 0.99, "p_ne": 0.01},
  "training": {"length": 2000, "seeds": 3},
  "seed": 8
}"#,
    );
    let out_dir = dir.path().join("out");
    assert_success(&run(&[
        "learn",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("learn.json")).unwrap())
            .unwrap();
    assert_eq!(doc["schema"], "cogarq-learn-v1");
    let fits = doc["fits"].as_array().unwrap();
    assert_eq!(fits.len(), 3);
    for fit in fits {
        assert!(fit["log_likelihood"].as_f64().unwrap().is_finite());
        let p_ee_hat = fit["transitions_hat"]["rows"][0][0].as_f64().unwrap();
        assert!((p_ee_hat - 0.99).abs() < 0.2, "p_ee_hat = {p_ee_hat}");
    }
}

#[test]
fn learn_reads_a_recorded_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.txt");
    std::fs::write(&trace, format!("# regime=silent\n{}\n", "AN".repeat(200))).unwrap();
    let config = write_config(
        dir.path(),
        "learn.json",
        &format!(
            r#"{{
  "model": {{"preset": "erasure", "p_ee": 0.99, "p_ne": 0.01}},
  "training": {{"trace_file": {:?}}},
  "seed": 8
}}"#,
            trace.to_str().unwrap()
        ),
    );
    let out_dir = dir.path().join("out");
    assert_success(&run(&[
        "learn",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("learn.json")).unwrap())
            .unwrap();
    // The alternating trace pins both transition estimates near one.
    let p_ne_hat = doc["fits"][0]["transitions_hat"]["rows"][1][0].as_f64().unwrap();
    assert!(p_ne_hat > 0.9, "p_ne_hat = {p_ne_hat}");

    let missing = run(&[
        "learn",
        "--config",
        config.to_str().unwrap(),
        "--set",
        "training.trace_file=\"/nonexistent/trace.txt\"",
    ]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn trace_output_is_newline_delimited_json() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "trace.json",
        r#"{
  "model": {"preset": "erasure", "p_ee": 0.99, "p_ne": 0.01},
  "sim": {"horizon": 50, "replications": 1, "trace": true},
  "policies": ["always_listen"],
  "seed": 3
}"#,
    );
    let out_dir = dir.path().join("out");
    assert_success(&run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(out_dir.join("trace.ndjson")).unwrap();
    assert_eq!(text.lines().count(), 50);
    for line in text.lines() {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(row["action"], "Listen");
    }
}
