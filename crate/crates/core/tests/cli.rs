use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use netspice::datagen::GroundTruthNetwork;
use netspice::harness::ResultTable;
use netspice::netmodel::{NetworkEstimate, TimeSeries};

fn netspice(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netspice"))
        .current_dir(dir)
        .args(args)
        .env("NETSPICE_WORKERS", "2")
        .output()
        .expect("spawn")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn generate_estimate_evaluate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&netspice(d, &["generate", "--J", "5", "--seed", "3", "--samples", "400", "--out", "gen"]));
    let truth = GroundTruthNetwork::from_json(&fs::read_to_string(d.join("gen/network.json")).unwrap()).unwrap();
    assert_eq!(truth.nodes, 5);
    let w = TimeSeries::read_csv(fs::File::open(d.join("gen/series.csv")).unwrap()).unwrap();
    assert_eq!((w.nodes(), w.len()), (5, 400));

    ok(&netspice(
        d,
        &["estimate", "--input", "gen/series.csv", "--K", "3", "--delta", "0.1", "--diagnostics", "diag.json"],
    ));
    let est = NetworkEstimate::from_json(&fs::read_to_string(d.join("network.json")).unwrap()).unwrap();
    assert_eq!((est.nodes, est.lags), (5, 3));
    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("diag.json")).unwrap()).unwrap();
    assert_eq!(diag.as_array().unwrap().len(), 5);
    assert!(diag[0]["kkt_residual"].is_number());

    let out = netspice(d, &["evaluate", "--estimate", "network.json", "--truth", "gen/network.json"]);
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("metric,value\n"));
    for metric in ["tpr,", "fpr,", "dis,", "nmse,"] {
        assert!(text.contains(metric), "{text}");
    }
}

#[test]
fn experiment_writes_default_results_directory() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("exp1.json"), r#"{"J": 4, "monte_carlo": 2, "n_ratios": [1, 2]}"#).unwrap();
    ok(&netspice(d, &["experiment", "--config", "exp1.json"]));
    let out = d.join("results/exp1");
    let table = ResultTable::read_rows(fs::File::open(out.join("table.csv")).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 4);
    let long = fs::read_to_string(out.join("long.csv")).unwrap();
    assert!(long.starts_with("run_id,mode,n_ratio,N,metric,value\n"));
    assert!(fs::read_to_string(out.join("aggregate.csv")).unwrap().lines().count() == 3);

    // Flags override the file.
    ok(&netspice(d, &["experiment", "--config", "exp1.json", "--monte-carlo", "1", "--out", "one"]));
    let one = ResultTable::read_rows(fs::File::open(d.join("one/table.csv")).unwrap()).unwrap();
    assert_eq!(one.rows.len(), 2);
    assert!(one.rows.iter().zip(&table.rows).all(|(a, b)| a.same_outcome(b)));
}

#[test]
fn replay_reproduces_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("c.json"), r#"{"J": 4, "monte_carlo": 3, "n_ratios": [1, 4], "master_seed": 5}"#).unwrap();
    ok(&netspice(d, &["experiment", "--config", "c.json", "--out", "res"]));
    let out = netspice(d, &["replay", "--config", "c.json", "--run", "2"]);
    ok(&out);
    let replay = ResultTable::read_rows(out.stdout.as_slice()).unwrap();
    let stored = ResultTable::read_rows(fs::File::open(d.join("res/table.csv")).unwrap()).unwrap().rows_for_run(2);
    assert_eq!(replay.rows.len(), 2);
    assert!(replay.rows.iter().zip(&stored).all(|(a, b)| a.same_outcome(b)));
}

#[test]
fn failures_emit_a_json_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = netspice(d, &["estimate", "--input", "missing.csv", "--K", "3"]);
    assert!(!out.status.success());
    let line: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(line["error"], "io");

    fs::write(d.join("bad.json"), r#"{"n_ratios": [4, 1]}"#).unwrap();
    let out = netspice(d, &["experiment", "--config", "bad.json"]);
    assert!(!out.status.success());
    let line: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(line["error"], "invalid_argument");

    fs::write(d.join("c.json"), r#"{"monte_carlo": 2}"#).unwrap();
    let out = netspice(d, &["replay", "--config", "c.json", "--run", "7"]);
    let line: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(line["error"], "index_out_of_range");
}
