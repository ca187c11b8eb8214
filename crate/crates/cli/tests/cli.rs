use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bci-itr")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let mut a = args.to_vec();
    a.extend(["--format", "json"]);
    let out = bin(&a);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid json")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn capacity_inline_and_file() {
    let v = json(&["capacity", "--inline", "bsc 0.1"]);
    assert!((v["capacity"].as_f64().unwrap() - 0.531004).abs() < 1e-5);

    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("id.csv");
    fs::write(&f, "1,0,0,0\n0,1,0,0\n0,0,1,0\n0,0,0,1\n").unwrap();
    let v = json(&["capacity", path(&f), "--period", "1"]);
    assert!((v["capacity"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert!((v["bits_per_min"].as_f64().unwrap() - 120.0).abs() < 1e-6);
}

#[test]
fn capacity_rejects_bad_rows() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("bad.csv");
    fs::write(&f, "0.9,0.1\n0.6,0.6\n").unwrap();
    let out = bin(&["capacity", path(&f)]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 2") && err.contains("line 2"), "{err}");

    assert_eq!(code(&bin(&["capacity", "--inline", "bsc 2"])), 2);
    assert_eq!(code(&bin(&["capacity", "--inline", "bsc 0.1", "--threshold", "0"])), 2);
    assert_eq!(code(&bin(&["capacity"])), 2);
}

#[test]
fn capacity_flags_nonconvergence() {
    let out = bin(&["capacity", "--inline", "binary 0.1 0.3", "--max-iter", "1", "--threshold", "1e-15"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("false"));
}

#[test]
fn design_table() {
    let v = json(&["design"]);
    let expect = [0.9277, 0.746, 0.5787, 0.4412, 0.3219, 0.2155];
    let rows = v["results"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    for (r, e) in rows.iter().zip(expect) {
        assert!((r["capacity"].as_f64().unwrap() - e).abs() < 0.01);
        assert!(r["fano_satisfied"].as_bool().unwrap());
    }

    let v = json(&["design", "--targets", "1.0"]);
    let r = &v["results"][0];
    assert!((r["capacity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(r["conditional_entropy"].as_f64().unwrap(), 0.0);

    let out = bin(&["design", "--targets", "0.4"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
    assert_eq!(code(&bin(&["design", "--targets", "1.5"])), 2);
    assert_eq!(code(&bin(&["design", "-m", "1"])), 2);
}

#[test]
fn design_table_text_has_schema_rows() {
    let out = bin(&["design", "--targets", "0.9,0.8"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for row in ["Capacity", "Conditional Entropy", "Fano's Bound"] {
        assert!(text.contains(row), "{text}");
    }
}

fn confusion(dir: &Path, name: &str, body: &str) -> String {
    let f = dir.join(name);
    fs::write(&f, body).unwrap();
    f.to_str().unwrap().to_string()
}

#[test]
fn itr_columns() {
    let dir = tempfile::tempdir().unwrap();
    let bal = confusion(dir.path(), "bal.csv", "# window_s=1\na,b,c\n8,1,1\n1,8,1\n1,1,8\n");
    let v = json(&["itr", &bal]);
    let r = &v["rows"][0];
    let conv = r["conventional_bits_per_min"].as_f64().unwrap();
    assert!((r["balanced_optimal_id_bits_per_min"].as_f64().unwrap() - conv).abs() < 1e-6);
    assert!((r["asym_optimal_id_bits_per_min"].as_f64().unwrap() - conv).abs() < 1e-6);
    assert_eq!(r["period_s"].as_f64().unwrap(), 1.5);

    // A = 0.8 with every error in one direction
    let ext = confusion(dir.path(), "ext.csv", "a,b\n6,4\n0,10\n");
    let v = json(&["itr", &ext, "--window", "0.5", "--gaze", "0"]);
    let r = &v["rows"][0];
    let asym = r["asym_optimal_id_bits_per_min"].as_f64().unwrap();
    let bal = r["balanced_optimal_id_bits_per_min"].as_f64().unwrap();
    assert!(asym > bal);
    assert!((asym - 120.0 * 0.406_787).abs() < 1e-3);

    assert_eq!(code(&bin(&["itr", &ext])), 2, "window required");
    assert_eq!(code(&bin(&["itr", path(&dir.path().join("missing.csv")), "--window", "1"])), 2);
}

#[test]
fn itr_reference_window() {
    let dir = tempfile::tempdir().unwrap();
    let a = confusion(dir.path(), "a.csv", "# subject=s1\n# window_s=0.5\na,b\n6,4\n0,10\n");
    let b = confusion(dir.path(), "b.csv", "# subject=s1\n# window_s=1\na,b\n9,1\n1,9\n");
    let v = json(&["itr", &a, &b, "--reference-window", "0.5"]);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows[0]["optimal_input"], rows[1]["optimal_input"]);
    // a fixed non-uniform input on a symmetric channel falls short of capacity
    let r = &rows[1];
    assert!(r["asym_optimal_id_bits_per_min"].as_f64().unwrap() < r["capacity_bits_per_min"].as_f64().unwrap());
    assert_eq!(code(&bin(&["itr", &b, "--reference-window", "0.5"])), 2);
}

#[test]
fn itr_pooled_is_below_subject_mean() {
    let dir = tempfile::tempdir().unwrap();
    let s1 = confusion(dir.path(), "s1.csv", "# subject=s1\n# window_s=1\na,b,c,d\n297,1,1,1\n1,297,1,1\n1,1,297,1\n1,1,1,297\n");
    let s2 = confusion(dir.path(), "s2.csv", "# subject=s2\n# window_s=1\na,b,c,d\n150,50,50,50\n50,150,50,50\n50,50,150,50\n50,50,50,150\n");
    let each = json(&["itr", &s1, &s2]);
    let mean: f64 = each["rows"].as_array().unwrap().iter().map(|r| r["conventional_bits_per_min"].as_f64().unwrap()).sum::<f64>() / 2.0;
    let pooled = json(&["itr", &s1, &s2, "--pooled"]);
    assert_eq!(pooled["rows"].as_array().unwrap().len(), 1);
    assert!(mean > pooled["rows"][0]["conventional_bits_per_min"].as_f64().unwrap());
}

#[test]
fn simulate_is_deterministic_and_feeds_itr() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let run = |out: &Path| bin(&["simulate", "--out", path(out), "--subjects", "2", "--snr-db", "-15", "--seed", "7"]);
    let (ra, _) = (run(&a), run(&b));
    assert!(ra.status.success(), "{}", String::from_utf8_lossy(&ra.stderr));
    for name in ["s01_w0.5.csv", "s02_w0.5.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    }
    let text = fs::read_to_string(a.join("s01_w0.5.csv")).unwrap();
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 9);
    assert!(data[1..].iter().all(|l| l.split(',').count() == 8));

    let v = json(&["itr", path(&a.join("s01_w0.5.csv")), path(&a.join("s02_w0.5.csv"))]);
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert!(v["rows"].as_array().unwrap().iter().all(|r| r["fano_satisfied"].as_bool().unwrap()));
    let other = bin(&["simulate", "--out", path(&dir.path().join("c")), "--subjects", "2", "--snr-db", "-15", "--seed", "8"]);
    assert!(other.status.success());
    assert_ne!(fs::read(a.join("s01_w0.5.csv")).unwrap(), fs::read(dir.path().join("c/s01_w0.5.csv")).unwrap());
}

#[test]
fn simulate_validates_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path());
    for bad in [
        vec!["--trials", "2"],
        vec!["--classes", "1"],
        vec!["--windows", "0"],
        vec!["--filter-bank", "20"],
        vec!["--harmonics", "20"],
    ] {
        let mut args = vec!["simulate", "--out", out];
        args.extend(bad.iter().copied());
        assert_eq!(code(&bin(&args)), 2, "{bad:?}");
    }
}

#[test]
fn evaluate_saved_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin(&["simulate", "--out", path(dir.path()), "--save-datasets", "--snr-db", "10"]);
    assert!(out.status.success());
    let ds = dir.path().join("s01_w0.5.dataset.json");
    let csv = dir.path().join("eval.csv");
    let v = json(&["evaluate", path(&ds), "--ensemble", "--out", path(&csv)]);
    let rec = &v["records"][0];
    assert_eq!(rec["method"], "etrca");
    assert!(rec["accuracy"].as_f64().unwrap() >= 0.99);
    assert!(fs::read_to_string(&csv).unwrap().contains("# method=etrca"));
    assert_eq!(code(&bin(&["evaluate", path(&dir.path().join("none.json"))])), 2);
}

#[test]
fn csv_output_and_global_flags() {
    let out = bin(&["--format", "csv", "capacity", "--inline", "bec 0.3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("quantity,value\ncapacity_bits,0.700000\n"), "{text}");
    let a = bin(&["design", "--seed", "3", "--targets", "0.85"]);
    let b = bin(&["design", "--seed", "3", "--targets", "0.85"]);
    assert_eq!(a.stdout, b.stdout);
}
