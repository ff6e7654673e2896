use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jackson-kit"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("JACKSON_KIT_THREADS")
        .output()
        .unwrap()
}

fn write_model(dir: &Path, name: &str, json: &str) -> String {
    let p: PathBuf = dir.join(name);
    fs::write(&p, json).unwrap();
    p.display().to_string()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

fn field(rows: &[Vec<String>], row: usize, col: usize) -> f64 {
    rows[row][col].parse().unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

/// The manifest must list exactly the other files in the directory.
fn assert_manifest_complete(dir: &Path) {
    let listed: BTreeSet<String> = manifest(dir)["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let present: BTreeSet<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json")
        .collect();
    assert_eq!(listed, present);
}

#[test]
fn analyze_writes_alpha_and_steady_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = run(&["analyze", &fixture("five_queue.json")], &out);
    assert_eq!(res.status.code(), Some(0));
    let rows = read_csv(&out.join("alpha.csv"));
    assert_eq!(rows.len(), 5);
    let first = [2.22716459315665, 0.74733056865331, 0.047319746222991];
    for (j, v) in first.iter().enumerate() {
        assert!((field(&rows, 0, j + 1) - v).abs() < 1e-12);
    }
    let header = csv::Reader::from_path(out.join("alpha.csv")).unwrap().headers().unwrap().clone();
    assert_eq!(header.iter().collect::<Vec<_>>(), ["queue", "1", "2", "3", "4", "5"]);
    let ss: serde_json::Value = serde_json::from_slice(&fs::read(out.join("steady_state.json")).unwrap()).unwrap();
    assert!((ss["arrival_rates"][1].as_f64().unwrap() - 18.118010002622555).abs() < 1e-9);
    assert_manifest_complete(&out);
    assert_eq!(manifest(&out)["command"], "analyze");
}

#[test]
fn analyze_single_queue() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "q.json", r#"{"num_queues":1,"routing":[[0.0]],"exo_rates":[5.0],"service_rates":[20.0]}"#);
    let out = dir.path().join("out");
    assert_eq!(run(&["analyze", &model], &out).status.code(), Some(0));
    let ss: serde_json::Value = serde_json::from_slice(&fs::read(out.join("steady_state.json")).unwrap()).unwrap();
    assert!((ss["sojourn_times"][0].as_f64().unwrap() - 1.0 / 15.0).abs() < 1e-15);
    assert!((ss["queue_lengths"][0].as_f64().unwrap() - 25.0 / 300.0).abs() < 1e-15);
}

#[test]
fn unstable_model_exits_3_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "q.json", r#"{"num_queues":1,"routing":[[0.0]],"exo_rates":[25.0],"service_rates":[20.0]}"#);
    let out = dir.path().join("out");
    let res = run(&["analyze", &model], &out);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("queues [1]"));
    assert!(!out.exists());
}

#[test]
fn invalid_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad = write_model(dir.path(), "bad.json", r#"{"num_queues":2,"routing":[[0.7,0.6],[0,0]],"exo_rates":[1,1],"service_rates":[5,5]}"#);
    let res = run(&["analyze", &bad], &out);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("row"));

    let missing = write_model(dir.path(), "missing.json", r#"{"num_queues":1,"routing":[[0.0]],"exo_rates":[1]}"#);
    let res = run(&["analyze", &missing], &out);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("service_rates"));

    let ex1 = fixture("five_queue.json");
    // Queue 1 routes to queue 2, so {1} | {3} | {2,4,5} is not separated.
    let res = run(&["reduce", &ex1, "--partition", r#"{"head":[1],"cutset":[3],"tail":[2,4,5]}"#], &out);
    assert_eq!(res.status.code(), Some(2));
    let res = run(&["perturb", &ex1, "--target", "4", "--partition", &fixture("five_queue_partition.json")], &out);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn perturb_sweep_on_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let args = [
        "perturb",
        &fixture("five_queue_single_entry.json"),
        "--target",
        "1",
        "--partition",
        &fixture("five_queue_partition.json"),
        "--delta",
        "1",
    ];
    assert_eq!(run(&args, &out).status.code(), Some(0));
    let rows = read_csv(&out.join("perturb.csv"));
    assert_eq!(rows.len(), 5);
    for col in 2..=5 {
        assert!(field(&rows, 2, col) > field(&rows, 3, col));
        assert!(field(&rows, 2, col) > field(&rows, 4, col));
    }
    assert_eq!(rows[3][6], "true");
    assert_eq!(rows[0][6], "na");
    assert_manifest_complete(&out);
    for svg in ["perturb_delta_lambda.svg", "perturb_queue_length.svg", "perturb_sojourn.svg", "perturb_delay.svg"] {
        assert!(fs::read_to_string(out.join(svg)).unwrap().starts_with("<svg"));
    }
}

#[test]
fn perturb_zero_delta_reproduces_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let args = [
        "perturb",
        &fixture("five_queue_single_entry.json"),
        "--target",
        "2",
        "--partition",
        &fixture("five_queue_partition.json"),
        "--delta",
        "0",
    ];
    assert_eq!(run(&args, &out).status.code(), Some(0));
    let rows = read_csv(&out.join("perturb.csv"));
    for row in &rows {
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(row[3..6], rows[0][3..6]);
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("perturb_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["baseline"]["queue_length"].as_f64().unwrap(), field(&rows, 0, 3));
}

#[test]
fn perturb_twelve_queue_cutset_dominates_tail() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let args = ["perturb", &fixture("twelve_queue.json"), "--target", "1", "--partition", &fixture("twelve_queue_partition.json")];
    assert_eq!(run(&args, &out).status.code(), Some(0));
    let rows = read_csv(&out.join("perturb.csv"));
    let cut_max = (4..7).map(|k| field(&rows, k, 2)).fold(0.0, f64::max);
    for k in 7..12 {
        assert!(field(&rows, k, 2) <= cut_max);
        assert_eq!(rows[k][6], "true");
    }
}

#[test]
fn perturb_destabilizing_receiver_exits_4_with_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let args = ["perturb", &fixture("five_queue.json"), "--target", "1", "--partition", &fixture("five_queue_partition.json")];
    let res = run(&args, &out);
    assert_eq!(res.status.code(), Some(4));
    let rows = read_csv(&out.join("perturb.csv"));
    assert_eq!(rows.len(), 5);
    // An extra unit at queue 2 pushes queue 2 past its service rate.
    assert_eq!(rows[1][7], "2");
    assert_eq!(rows[1][3], "");
    assert_manifest_complete(&out);
}

#[test]
fn reduce_example_and_fold() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let args = ["reduce", &fixture("five_queue.json"), "--partition", r#"{"head":[1,2],"cutset":[3],"tail":[4,5]}"#];
    assert_eq!(run(&args, &out).status.code(), Some(0));
    let reduced: serde_json::Value = serde_json::from_slice(&fs::read(out.join("reduced.json")).unwrap()).unwrap();
    let r = &reduced["routing"];
    assert!((r[2][2].as_f64().unwrap() - 0.2103).abs() <= 5e-4);
    assert_eq!(r[0][1].as_f64().unwrap(), 0.45);
    assert_eq!(reduced["provenance"]["index_map"], serde_json::json!([1, 2, 3]));
    assert_eq!(reduced["provenance"]["folded"], false);
    let eq: serde_json::Value = serde_json::from_slice(&fs::read(out.join("equivalence.json")).unwrap()).unwrap();
    assert!(eq["max_alpha_diff"].as_f64().unwrap() <= 1e-9);
    assert_eq!(eq["dropped_tail_arrivals"], true);

    let folded_out = dir.path().join("folded");
    let args = ["reduce", &fixture("five_queue.json"), "--partition", &fixture("five_queue_partition.json"), "--fold"];
    assert_eq!(run(&args, &folded_out).status.code(), Some(0));
    let eq: serde_json::Value = serde_json::from_slice(&fs::read(folded_out.join("equivalence.json")).unwrap()).unwrap();
    for d in eq["arrival_rate_diffs"].as_array().unwrap() {
        assert!(d.as_f64().unwrap().abs() <= 1e-9);
    }
    assert_manifest_complete(&folded_out);
}

#[test]
fn reduce_with_empty_tail_keeps_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let args = ["reduce", &fixture("five_queue.json"), "--partition", r#"{"head":[1,2],"cutset":[3,4,5]}"#];
    assert_eq!(run(&args, &out).status.code(), Some(0));
    let reduced: serde_json::Value = serde_json::from_slice(&fs::read(out.join("reduced.json")).unwrap()).unwrap();
    let original: serde_json::Value = serde_json::from_str(&fs::read_to_string(fixture("five_queue.json")).unwrap()).unwrap();
    for key in ["routing", "exo_rates", "service_rates"] {
        assert_eq!(reduced[key], original[key]);
    }
}

#[test]
fn reduce_singular_tail_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(
        dir.path(),
        "trap.json",
        r#"{"num_queues":3,"routing":[[0,0.5,0],[0.3,0,0.2],[0,0,1.0]],"exo_rates":[1,0,0],"service_rates":[5,5,5]}"#,
    );
    let out = dir.path().join("out");
    let res = run(&["reduce", &model, "--partition", r#"{"head":[1],"cutset":[2],"tail":[3]}"#], &out);
    assert_eq!(res.status.code(), Some(5));
}

#[test]
fn simulate_outputs_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let args = ["simulate", &fixture("five_queue_single_entry.json"), "--horizon", "20000", "--seed", "42", "--trace", "1", "--sample-dt", "100"];
    assert_eq!(run(&args, &out).status.code(), Some(0));
    let rows = read_csv(&out.join("compare.csv"));
    let sojourns: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == "sojourn").collect();
    assert_eq!(sojourns.len(), 5);
    for r in sojourns {
        assert!(r[5].parse::<f64>().unwrap() < 0.10, "{r:?}");
    }
    let trace = read_csv(&out.join("trace_q1.csv"));
    assert_eq!(trace.len(), 201);
    let header = csv::Reader::from_path(out.join("trace_q1.csv")).unwrap().headers().unwrap().clone();
    assert_eq!(header.iter().collect::<Vec<_>>(), ["time", "queue_length"]);
    assert_manifest_complete(&out);
    let m = manifest(&out);
    assert_eq!(m["seed"], 42);
    assert_eq!(m["options"]["warmup"], "2000");
}

#[test]
fn simulate_thread_cap_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let model = fixture("five_queue_single_entry.json");
    let args = ["simulate", model.as_str(), "--horizon", "2000", "--reps", "4"];
    let mut outputs = Vec::new();
    for threads in ["1", "3", "0"] {
        let out = dir.path().join(format!("t{threads}"));
        let res = Command::new(env!("CARGO_BIN_EXE_jackson-kit"))
            .args(args)
            .arg("--out")
            .arg(&out)
            .env("JACKSON_KIT_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(res.status.code(), Some(0));
        outputs.push(fs::read(out.join("sim_stats.json")).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));

    let res = Command::new(env!("CARGO_BIN_EXE_jackson-kit"))
        .args(args)
        .arg("--out")
        .arg(dir.path().join("bad"))
        .env("JACKSON_KIT_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn simulate_unstable_model_skips_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "q.json", r#"{"num_queues":1,"routing":[[0.0]],"exo_rates":[25.0],"service_rates":[20.0]}"#);
    let out = dir.path().join("out");
    assert_eq!(run(&["simulate", &model, "--horizon", "200"], &out).status.code(), Some(0));
    assert!(out.join("sim_stats.json").exists());
    assert!(!out.join("compare.csv").exists());
    assert_manifest_complete(&out);
}

#[test]
fn line_check_matches_inversion() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = run(&["line-check", "--m", "10", "--rf", "0.3", "--rb", "0.2", "--rl", "0.1"], &out);
    assert_eq!(res.status.code(), Some(0));
    let rows = read_csv(&out.join("line_check.csv"));
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r[3].parse::<f64>().unwrap() <= 1e-9));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("line_check.json")).unwrap()).unwrap();
    assert!(summary["decay"]["r_squared"].as_f64().unwrap() > 0.99);
    assert!(summary["decay"]["log_slope"].as_f64().unwrap() < 0.0);
    assert!(fs::read_to_string(out.join("line_check.svg")).unwrap().contains("polyline"));
    assert_eq!(manifest(&out)["model_path"], serde_json::Value::Null);
}

#[test]
fn line_check_without_backward_routing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = run(&["line-check", "--m", "5", "--rf", "0.3", "--rb", "0", "--rl", "0.2"], &out);
    assert_eq!(res.status.code(), Some(0));
    let rows = read_csv(&out.join("line_check.csv"));
    assert!((field(&rows, 0, 1) - 1.0 / 0.8).abs() < 1e-15);
    for k in 1..5 {
        assert_eq!(field(&rows, k, 1), 0.0);
    }
}

#[test]
fn line_check_degenerate_reports_direct_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = run(&["line-check", "--m", "6", "--rf", "0.45", "--rb", "0.45", "--rl", "0.1"], &out);
    assert_eq!(res.status.code(), Some(6));
    let rows = read_csv(&out.join("line_check.csv"));
    assert!(rows.iter().all(|r| r[1].is_empty() && !r[2].is_empty()));
    let res = run(&["line-check", "--m", "6", "--rf", "0.7", "--rb", "0.45", "--rl", "0.1"], &out);
    assert_eq!(res.status.code(), Some(2));
}
