use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn celldiv(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_celldiv"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn missing_seed_is_a_config_error_before_any_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = celldiv(tmp.path(), &["solve", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn config_file_needs_a_known_version() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "version = 9\nseed = 1\n").unwrap();
    let out = celldiv(tmp.path(), &["solve", "--config", "c.toml"]);
    assert_eq!(out.status.code(), Some(2));
    fs::write(tmp.path().join("d.toml"), "seed = 1\n").unwrap();
    assert_eq!(
        celldiv(tmp.path(), &["solve", "--config", "d.toml"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn solve_reports_distance_to_the_explicit_profile() {
    let tmp = tempfile::tempdir().unwrap();
    let out = celldiv(
        tmp.path(),
        &[
            "solve",
            "--model",
            "mitosis-constant",
            "--R",
            "1",
            "--kernel",
            "dirac",
            "--seed",
            "1",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dir = tmp.path().join("out");
    let m = manifest(&dir);
    let rel = m["results"]["relative_l2_error_to_explicit"]
        .as_f64()
        .unwrap();
    assert!(rel < 1e-2, "relative L2 error {rel}");
    let csv = fs::read_to_string(dir.join("density.csv")).unwrap();
    assert!(csv.starts_with("x,value\n"));
    assert_eq!(csv.lines().count(), 1001);
    assert_eq!(m["artifacts"][0]["path"], "density.csv");
}

#[test]
fn numerical_failure_exits_3_and_removes_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.toml"),
        "version = 1\nseed = 1\nout = \"o\"\n[solver]\nmax_steps = 10\nstepping = \"local\"\n",
    )
    .unwrap();
    let out = celldiv(tmp.path(), &["solve", "--config", "c.toml"]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn reruns_are_byte_identical_apart_from_the_timestamp() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.toml"),
        "version = 1\nseed = 99\nout = \"o\"\n[model]\nkernel = \"beta22\"\n[test]\nn = 300\n",
    )
    .unwrap();
    let dir = tmp.path().join("o");
    let run = || {
        let out = celldiv(tmp.path(), &["sample", "--config", "c.toml"]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let mut m = manifest(&dir);
        m.as_object_mut().unwrap().remove("timestamp");
        (fs::read(dir.join("sample.csv")).unwrap(), m)
    };
    let (a, ma) = run();
    let (b, mb) = run();
    assert_eq!(a, b);
    assert_eq!(ma, mb);
    assert!(String::from_utf8_lossy(&a).starts_with("# seed=99 "));
}

#[test]
fn power_matches_across_pool_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |out: &'static str, jobs: &'static str| {
        vec![
            "power",
            "--model",
            "mitosis",
            "--kernel",
            "uniform",
            "--n",
            "50",
            "--reps",
            "100",
            "--calibration-reps",
            "100",
            "--alpha",
            "0.05",
            "--seed",
            "7",
            "--jobs",
            jobs,
            "--out",
            out,
        ]
    };
    assert!(celldiv(tmp.path(), &args("a", "1")).status.success());
    assert!(celldiv(tmp.path(), &args("b", "3")).status.success());
    let a = fs::read(tmp.path().join("a/power.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/power.csv")).unwrap();
    assert_eq!(a, b);
    assert!(String::from_utf8_lossy(&a).starts_with("n,kernel,u_alpha,rejections,reps,power,se\n"));
}

#[test]
fn calibrate_then_test_a_sample() {
    let tmp = tempfile::tempdir().unwrap();
    let ok = |args: &[&str]| {
        let out = celldiv(tmp.path(), args);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    ok(&[
        "sample", "--kernel", "mixture", "--n", "200", "--seed", "3", "--out", "s",
    ]);
    ok(&[
        "calibrate",
        "--n",
        "200",
        "--calibration-reps",
        "100",
        "--seed",
        "4",
        "--out",
        "c",
    ]);
    ok(&[
        "test",
        "--sample",
        "s/sample.csv",
        "--calibration",
        "c/calibration.json",
        "--seed",
        "5",
        "--out",
        "t",
    ]);
    let report: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("t/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["decision"], 1);
    assert_eq!(report["sample_seed"], 3);
    assert_eq!(report["calibration_seed"], 4);

    let out = celldiv(
        tmp.path(),
        &[
            "test",
            "--R",
            "2",
            "--sample",
            "s/sample.csv",
            "--calibration",
            "c/calibration.json",
            "--seed",
            "5",
            "--out",
            "u",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn least_squares_fit_of_the_bundled_density() {
    let tmp = tempfile::tempdir().unwrap();
    let out = celldiv(tmp.path(), &["fit", "--method", "lsq", "--seed", "1"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let fit: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/fit.json")).unwrap())
            .unwrap();
    let r = fit["params"]["R"].as_f64().unwrap();
    assert!((1.3..=1.55).contains(&r), "R = {r}");
}

#[test]
fn mitosis_grid_search_writes_an_objective_table() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("c.toml"),
        r#"version = 1
seed = 1
[fit]
method = "grid-mitosis"
r = [0.05]
gamma = [1.05, 1.325]
eta = [9.0]
"#,
    )
    .unwrap();
    let out = celldiv(tmp.path(), &["fit", "--config", "c.toml"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = fs::read_to_string(tmp.path().join("out/objectives.csv")).unwrap();
    assert!(table.starts_with("r,gamma,eta,objective,lambda,status\n"));
    assert_eq!(table.lines().count(), 3);
}
