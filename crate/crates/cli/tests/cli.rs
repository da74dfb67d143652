use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;
use tempfile::TempDir;

const TRIANGLE: [[f64; 2]; 3] = [[0.0, 0.0], [10.0, 0.0], [5.0, 8.660_254_037_844_386]];

fn spuds(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spuds"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Unit-variance blobs written as `x,y,label` rows.
fn write_blobs(dir: &Path, name: &str, centers: &[[f64; 2]], per: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::new();
    for (k, c) in centers.iter().enumerate() {
        for _ in 0..per {
            let x = c[0] + rng.sample::<f64, _>(StandardNormal);
            let y = c[1] + rng.sample::<f64, _>(StandardNormal);
            text.push_str(&format!("{x},{y},{k}\n"));
        }
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn cluster_three_blobs() {
    let dir = TempDir::new().unwrap();
    let input = write_blobs(dir.path(), "blobs.csv", &TRIANGLE, 200, 1);
    let out_path = dir.path().join("run.json");
    let labels_path = dir.path().join("labels.txt");
    let out = spuds(&[
        "cluster", "--input", s(&input), "--label-column", "2", "--seed", "7",
        "--output", s(&out_path), "--labels-out", s(&labels_path),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rec = json(&out_path);
    assert_eq!(rec["result"]["selected_c"], 3);
    assert!(rec["result"]["nmi"].as_f64().unwrap() > 0.99);
    assert_eq!(rec["seed"], 7);
    assert_eq!(rec["resolved"]["n"], 600);
    assert_eq!(rec["resolved"]["gamma"], 3);
    assert!(rec["resolved"]["sigma"].as_f64().unwrap() > 0.0);
    assert!(rec["resolved"]["intrinsic_dim"].as_u64().is_some());
    assert!(rec["resolved"]["s_value"].as_f64().is_some());
    assert!(rec["timings"]["graph"].as_f64().is_some());
    assert_eq!(rec["version"], env!("CARGO_PKG_VERSION"));
    let written: Vec<u64> = fs::read_to_string(&labels_path)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    let labels: Vec<u64> = rec["result"]["labels"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert_eq!(written, labels);
}

#[test]
fn overrides_are_echoed_verbatim() {
    let dir = TempDir::new().unwrap();
    let input = write_blobs(dir.path(), "data.csv", &TRIANGLE[..2], 40, 2);
    let out_path = dir.path().join("run.json");
    let out = spuds(&[
        "cluster", "--input", s(&input), "--label-column", "2", "--sigma", "0.5", "--c0", "5",
        "--lambda", "0.9", "--gamma-frac", "0.01", "--step", "10", "--output", s(&out_path),
    ]);
    assert!(matches!(code(&out), 0 | 2), "{}", stderr(&out));
    let cfg = &json(&out_path)["config"];
    assert_eq!(cfg["sigma"], 0.5);
    assert_eq!(cfg["c0"], 5);
    assert_eq!(cfg["lambda"], 0.9);
    assert_eq!(cfg["gamma_frac"], 0.01);
    assert_eq!(cfg["step"], 10);
    let rec = json(&out_path);
    assert_eq!(rec["resolved"]["sigma"], 0.5);
    assert!(rec["resolved"]["intrinsic_dim"].is_null());
}

#[test]
fn rerunning_from_the_record_reproduces_the_partition() {
    let dir = TempDir::new().unwrap();
    let input = write_blobs(dir.path(), "blobs.csv", &TRIANGLE, 50, 3);
    let first = dir.path().join("first.json");
    let second = dir.path().join("second.json");
    let out = spuds(&["cluster", "--input", s(&input), "--c0", "4", "--seed", "11", "--output", s(&first)]);
    assert!(matches!(code(&out), 0 | 2));
    let out = spuds(&["cluster", "--config", s(&first), "--output", s(&second)]);
    assert!(matches!(code(&out), 0 | 2));
    let (a, b) = (json(&first), json(&second));
    assert_eq!(a["config"], b["config"]);
    assert_eq!(
        serde_json::to_string(&a["result"]["labels"]).unwrap(),
        serde_json::to_string(&b["result"]["labels"]).unwrap()
    );
    assert_eq!(a["result"]["trace"], b["result"]["trace"]);
}

#[test]
fn single_blob_exits_with_warning_code() {
    let dir = TempDir::new().unwrap();
    let input = write_blobs(dir.path(), "blob.csv", &[[0.0, 0.0]], 600, 0);
    let out = spuds(&["cluster", "--input", s(&input), "--label-column", "2", "--c0", "2", "--seed", "0"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let rec: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rec["result"]["selected_c"], 1);
    assert_eq!(rec["result"]["warning"], "no_valid_clustering");
}

#[test]
fn subsample_runs_on_the_drawn_rows() {
    let dir = TempDir::new().unwrap();
    let input = write_blobs(dir.path(), "blobs.csv", &TRIANGLE, 100, 4);
    let out = spuds(&["cluster", "--input", s(&input), "--subsample", "120", "--c0", "3", "--threads", "1"]);
    assert!(matches!(code(&out), 0 | 2), "{}", stderr(&out));
    let rec: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rec["resolved"]["n"], 120);
    assert_eq!(rec["threads"], 1);
    let idx = rec["subsample_indices"].as_array().unwrap();
    assert_eq!(idx.len(), 120);
    assert!(idx.iter().all(|i| i.as_u64().unwrap() < 300));
    assert_eq!(rec["result"]["labels"].as_array().unwrap().len(), 120);
}

#[test]
fn missing_input_names_the_path() {
    let out = spuds(&["cluster", "--input", "/no/such/data.csv"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("/no/such/data.csv"));
}

#[test]
fn unparsable_input_reports_row_and_column() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "0,0\n1,a\n2,2\n").unwrap();
    let out = spuds(&["cluster", "--input", s(&input)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("row 1, column 1"), "{}", stderr(&out));
}

fn labels_file(dir: &Path, name: &str, labels: &[u32]) -> PathBuf {
    let path = dir.join(name);
    let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn nmi_examples() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let run = |a: &[u32], b: &[u32]| {
        let out = spuds(&["nmi", "--pred", s(&labels_file(d, "p", a)), "--truth", s(&labels_file(d, "t", b))]);
        (code(&out), String::from_utf8(out.stdout).unwrap().trim().to_string())
    };
    assert_eq!(run(&[0, 0, 1, 2, 2], &[0, 0, 1, 2, 2]), (0, "1.000000".into()));
    assert_eq!(run(&[0, 0, 0, 0], &[0, 0, 1, 1]), (0, "0.000000".into()));
    assert_eq!(run(&[0, 0, 1, 1], &[0, 1, 0, 1]), (0, "0.000000".into()));
    assert_eq!(run(&[0, 1], &[0, 1, 1]).0, 1);
}

#[test]
fn asymptotics_ncut_study() {
    let dir = TempDir::new().unwrap();
    let out_path = dir.path().join("study.json");
    let out = spuds(&[
        "asymptotics", "--model", "gauss1d", "--surface-offset", "0", "--statistic", "ncut",
        "--n-grid", "1000,4000,16000", "--seeds", "10", "--alpha", "0.2", "--output", s(&out_path),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let run = json(&out_path);
    assert!((run["target"].as_f64().unwrap() - 2.256_758).abs() < 1e-6);
    assert_eq!(run["cells"].as_array().unwrap().len(), 30);
    assert_eq!(run["summary"].as_array().unwrap().len(), 3);
    let csv = fs::read_to_string(out_path.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 31);
    assert!(csv.starts_with("n,seed,"));
}

#[test]
fn asymptotics_single_grid_point() {
    let out = spuds(&["asymptotics", "--model", "gauss2d", "--statistic", "cut", "--n-grid", "300", "--seeds", "2"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let run: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(run["summary"].as_array().unwrap().len(), 1);
    assert!((run["alpha"].as_f64().unwrap() - 1.0 / 7.0).abs() < 1e-15);
}

#[test]
fn asymptotics_rejects_bad_requests() {
    let out = spuds(&["asymptotics", "--model", "gauss1d", "--statistic", "ncut", "--n-grid", "100", "--alpha", "0.25"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("rate condition"));
    assert!(stderr(&out).contains("n * sigma_n^(2d+2+eps) -> inf"));

    let out = spuds(&["asymptotics", "--model", "cauchy", "--statistic", "ncut", "--n-grid", "100"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("gauss1d, gauss2d, mixture1d, uniform1d"));

    let out = spuds(&["asymptotics", "--model", "gauss1d", "--statistic", "area", "--n-grid", "100"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("volume, total_volume, cut, ncut, ratio_cut"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&spuds(&["cluster", "--bogus"])), 1);
    assert_eq!(code(&spuds(&["--help"])), 0);
}
