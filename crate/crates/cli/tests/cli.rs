use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn cvclt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvclt")).args(args).output().expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const LOSSES: &str = "index,fold,loss\n0,0,1\n1,0,2\n2,1,3\n3,1,4\n";

#[test]
fn infer_ci_writes_document_to_out() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.csv", LOSSES);
    let out = dir.path().join("ci.json");
    let o = cvclt(&["infer", "ci", "--loss-matrix", s(&m), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["meta"]["tool"], "cvclt");
    assert!(v["meta"]["seed"].is_null());
    let r = &v["result"];
    assert_eq!(r["r_hat"], 2.5);
    let (lo, hi) = (r["ci_low"].as_f64().unwrap(), r["ci_high"].as_f64().unwrap());
    assert!(lo < 2.5 && 2.5 < hi);
}

#[test]
fn estimate_matches_worked_example() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.csv", LOSSES);
    let o = cvclt(&["estimate", "--loss-matrix", s(&m), "--estimator", "out"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json_stdout(&o)["result"]["value"], 1.25);
}

#[test]
fn missing_file_exits_two_and_names_path() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.csv");
    let o = cvclt(&["estimate", "--loss-matrix", s(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    let v = json_stdout(&o);
    assert_eq!(v["error"]["path"], s(&missing));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.csv"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(cvclt(&["estimate"]).status.code(), Some(2));
    assert_eq!(cvclt(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(cvclt(&["infer", "ci", "--loss-matrix", "x", "--estimator", "sideways"]).status.code(), Some(2));
}

#[test]
fn computation_error_exits_one() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.csv", "index,fold,loss\n0,0,1\n1,0,2\n");
    let o = cvclt(&["infer", "ci", "--loss-matrix", s(&m), "--alpha", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(json_stdout(&o)["error"]["code"].is_string());
}

#[test]
fn infer_test_exit_codes() {
    let dir = TempDir::new().unwrap();
    let better = write(&dir, "b.csv", "index,fold,loss\n0,0,-1\n1,0,-1.2\n2,1,-0.9\n3,1,-1.1\n4,0,-1\n5,1,-1.05\n");
    let o = cvclt(&["infer", "test", "--loss-matrix", s(&better)]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json_stdout(&o)["result"]["decision"], "reject");

    let worse = write(&dir, "w.csv", "index,fold,loss\n0,0,1\n1,0,1.2\n2,1,0.9\n3,1,1.1\n");
    assert_eq!(cvclt(&["infer", "test", "--loss-matrix", s(&worse)]).status.code(), Some(0));

    let zero = write(&dir, "z.csv", "index,fold,loss\n0,0,0\n1,0,0\n2,1,0\n3,1,0\n");
    let o = cvclt(&["infer", "test", "--loss-matrix", s(&zero)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(json_stdout(&o)["error"].is_object());
}

#[test]
fn generate_then_cv_round_trip() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    let task = r#"{"task":"linear_gaussian","beta":[1.0,-0.5],"noise_sd":1.0}"#;
    let o = cvclt(&["generate", "--task", task, "--n", "80", "--seed", "3", "--data-out", s(&data)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json_stdout(&o)["meta"]["seed"], 3);

    let losses = dir.path().join("l.csv");
    let algo = r#"{"algo":"ridge","lambda":1.0}"#;
    let o = cvclt(&["cv", "run", "--data", s(&data), "--algo", algo, "--k", "5", "--seed", "1", "--losses-out", s(&losses)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let cv = json_stdout(&o);
    let r_hat = cv["result"]["r_hat"].as_f64().unwrap();

    // the written losses feed back into inference and reproduce r_hat
    let o = cvclt(&["infer", "ci", "--loss-matrix", s(&losses)]);
    let ci = json_stdout(&o);
    assert!((ci["result"]["r_hat"].as_f64().unwrap() - r_hat).abs() <= 1e-12 * r_hat.abs());

    // the meta config is enough to rerun the command
    let cfg = &cv["meta"]["config"];
    assert_eq!(cfg["k"], 5);
    let again = cvclt(&["cv", "run", "--data", s(&data), "--algo", algo, "--k", "5", "--seed", &cv["meta"]["seed"].to_string()]);
    assert_eq!(json_stdout(&again)["result"], cv["result"]);
}

#[test]
fn omitted_seed_is_recorded_and_reproducible() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    let task = r#"{"task":"gaussian_location","variance":1.0}"#;
    cvclt(&["generate", "--task", task, "--n", "30", "--seed", "8", "--data-out", s(&data)]);
    let algo = r#"{"algo":"sample_mean"}"#;
    let first = json_stdout(&cvclt(&["cv", "run", "--data", s(&data), "--algo", algo, "--k", "3"]));
    let seed = first["meta"]["seed"].as_u64().expect("seed recorded");
    let second = json_stdout(&cvclt(&["cv", "run", "--data", s(&data), "--algo", algo, "--k", "3", "--seed", &seed.to_string()]));
    assert_eq!(first["result"], second["result"]);
}

#[test]
fn simulate_is_byte_identical_for_fixed_seed() {
    let dir = TempDir::new().unwrap();
    let plan = write(
        &dir,
        "plan.json",
        r#"{
            "task": {"task": "gaussian_location", "variance": 1.0},
            "subject": {"single": {"algo": "sample_mean"}},
            "loss": {"loss": "squared_error"},
            "procedures": [{"procedure": "clt"}, {"procedure": "cv_ttest"}],
            "sample_sizes": [30, 60],
            "replications": 20,
            "seed": 1,
            "mode": "ci_coverage",
            "folds": 5,
            "n_mc": 500
        }"#,
    );
    let run = |name: &str| {
        let out = dir.path().join(name);
        let csv = dir.path().join("long.csv");
        let o = cvclt(&["simulate", "--plan", s(&plan), "--seed", "7", "--out", s(&out), "--emit-csv", s(&csv)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        (std::fs::read(out).unwrap(), std::fs::read_to_string(csv).unwrap())
    };
    let (a, csv_a) = run("a.json");
    let (b, csv_b) = run("b.json");
    assert!(a == b, "JSON output differs between identical runs");
    assert_eq!(csv_a, csv_b);
    assert!(csv_a.starts_with("procedure,n,metric,value,low,high\n"));
    let v: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["meta"]["seed"], 7);
}

#[test]
fn loocv_ridge_reports_mean_loss() {
    let dir = TempDir::new().unwrap();
    let data = write(&dir, "d.csv", "x1,y\n1,2\n-1,1\n2,3\n0.5,0\n");
    let losses = dir.path().join("l.csv");
    let o = cvclt(&["loocv-ridge", "--data", s(&data), "--lambda", "0.5", "--losses-out", s(&losses)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json_stdout(&o);
    assert_eq!(v["result"]["n"], 4);
    assert_eq!(v["result"]["k"], 4);
    let text = std::fs::read_to_string(losses).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn malformed_json_argument_exits_two() {
    let dir = TempDir::new().unwrap();
    let o = cvclt(&["generate", "--task", "{not json", "--n", "5", "--data-out", s(&dir.path().join("d.csv"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn baseline_and_diagnose_run() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    let task = r#"{"task":"logistic_labels","p":3}"#;
    cvclt(&["generate", "--task", task, "--n", "100", "--seed", "2", "--data-out", s(&data)]);
    let o = cvclt(&[
        "baseline", "--kind", "five-by-two", "--data", s(&data),
        "--algo1", r#"{"algo":"logistic"}"#, "--algo2", r#"{"algo":"knn","k_neighbors":5}"#,
        "--loss", "zero_one", "--seed", "4",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json_stdout(&o)["result"]["procedure"], "five_by_two");

    let o = cvclt(&[
        "diagnose", "stability", "--task", r#"{"task":"gaussian_location","variance":1.0}"#,
        "--algo", r#"{"algo":"sample_mean"}"#, "--loss", "excess_squared:1", "--n", "40", "--k", "4",
        "--reps", "40", "--blocks", "4", "--seed", "6",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json_stdout(&o)["meta"]["seed"], 6);
}
