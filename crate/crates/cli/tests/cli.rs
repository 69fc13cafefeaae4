//! End-to-end tests driving the compiled binary.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_carleman"))
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("carleman-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn simulate_row_count_and_sidecar() {
    let dir = workdir("simulate");
    let out_path = dir.join("traj.csv");
    let out = run(&[
        "simulate",
        "--kuramoto2",
        "--omega1",
        "1",
        "--ktilde",
        "1",
        "--theta0",
        "0.3",
        "--method",
        "carleman-fourier",
        "-N",
        "10",
        "--t-end",
        "0.5",
        "--samples",
        "257",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let csv = fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 258, "header + 257 samples");
    assert!(lines[0].starts_with("t,comp0_re,comp0_im"));

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("traj.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["command"], "simulate");
    assert_eq!(meta["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(meta["config"]["n"], 10);
}

#[test]
fn simulate_reference_is_real_valued() {
    let dir = workdir("reference");
    let out_path = dir.join("ref.csv");
    let out = run(&[
        "simulate",
        "--kuramoto2",
        "--omega1",
        "0",
        "--theta0",
        "0.5",
        "--method",
        "reference",
        "--t-end",
        "0.5",
        "--samples",
        "11",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let csv = fs::read_to_string(&out_path).unwrap();
    assert!(csv.starts_with("t,comp0\n"));
    assert_eq!(csv.lines().count(), 12);
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = run(&["simulate", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_source_is_usage_error() {
    let out = run(&["simulate", "--method", "reference"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn single_cell_sweep_is_one_row() {
    let dir = workdir("singlecell");
    let out_path = dir.join("cell.csv");
    let out = run(&[
        "sweep",
        "--omega1",
        "0",
        "--method",
        "carleman-fourier",
        "-N",
        "4",
        "--theta0-min",
        "0.4",
        "--theta0-max",
        "0.4",
        "--theta0-count",
        "1",
        "--t-end",
        "0.05",
        "--t-count",
        "1",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let csv = fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2, "header + single cell: {csv}");
    assert!(lines[1].starts_with("0.4,0.05,"));
}

#[test]
fn classical_sweep_saturates_past_one() {
    let dir = workdir("saturate");
    let out_path = dir.join("ec.csv");
    let out = run(&[
        "sweep",
        "--omega1",
        "1",
        "--method",
        "classical",
        "-N",
        "10",
        "--theta0-min",
        "1.5",
        "--theta0-max",
        "1.5",
        "--theta0-count",
        "1",
        "--t-end",
        "0.5",
        "--t-count",
        "17",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let csv = fs::read_to_string(&out_path).unwrap();
    let saturated = csv
        .lines()
        .skip(1)
        .any(|line| line.split(',').nth(2) == Some("1"));
    assert!(saturated, "no saturated cell in:\n{csv}");
}

#[test]
fn sweep_is_deterministic_across_worker_counts() {
    let dir = workdir("determinism");
    let a = dir.join("a.csv");
    let b = dir.join("b.csv");
    for (path, workers) in [(&a, "1"), (&b, "4")] {
        let out = run(&[
            "sweep",
            "--omega1",
            "1",
            "--method",
            "carleman-fourier",
            "-N",
            "6",
            "--theta0-count",
            "5",
            "--t-count",
            "9",
            "--t-end",
            "0.2",
            "--workers",
            workers,
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_ok(&out);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn n0_report() {
    let out = run(&["n0", "--envelope-d", "2", "--envelope-r", "0.25", "--tstar", "0.1"]);
    assert_ok(&out);
    let report: serde_json::Value =
        serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["n0"], 2);
    assert_eq!(report["satisfiable"], true);
}

#[test]
fn bound_reports_unsatisfiable_horizon() {
    // fitted D = 2 at r = 1/2 gives T0 ~ 0.0429 < 0.1
    let out = run(&["bound", "--omega1", "1", "--tstar", "0.1"]);
    assert_ok(&out);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["satisfiable"], false);
    assert_eq!(report["n0"], serde_json::Value::Null);
}

#[test]
fn bound_report_passes_within_horizon() {
    let out = run(&[
        "bound",
        "--omega1",
        "1",
        "--theta0",
        "1.0",
        "--tstar",
        "0.03",
        "--n-max",
        "6",
    ]);
    assert_ok(&out);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["satisfiable"], true);
    let rows = report["per_n"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|row| row["pass"] == true));
}

#[test]
fn dump_matrix_formats() {
    let out = run(&[
        "dump-matrix",
        "--builder",
        "classical",
        "--kuramoto2",
        "--omega1",
        "0",
        "-N",
        "2",
    ]);
    assert_ok(&out);
    let csv = String::from_utf8(out.stdout).unwrap();
    assert!(csv.starts_with("row,col,value\n"));
    assert!(csv.contains("1,1,2"));

    let out = run(&[
        "dump-matrix",
        "--builder",
        "carleman-fourier",
        "--kuramoto2",
        "-N",
        "2",
    ]);
    assert_ok(&out);
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("k,l,row,col,re,im\n"));

    let out = run(&["dump-matrix", "--builder", "layout", "--kuramoto2", "-N", "2"]);
    assert_ok(&out);
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("grade,position,gamma_1,gamma_2\n"));
}

#[test]
fn normalize_model_file() {
    let dir = workdir("normalize");
    let model = dir.join("model.json");
    fs::write(
        &model,
        r#"{"d":2,"omegas":[1.0,-0.2],"K":2.0,"theta0":[0.5,0.1]}"#,
    )
    .unwrap();
    let out = run(&["normalize", "--model-file", model.to_str().unwrap()]);
    assert_ok(&out);
    let norm: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((norm["theta0"][0].as_f64().unwrap() - 0.2).abs() < 1e-12);
    assert!((norm["omegas"][0].as_f64().unwrap() - 0.6).abs() < 1e-12);
    assert_eq!(norm["ktilde"], -1.0);
}

#[test]
fn field_file_simulation_and_config_precedence() {
    let dir = workdir("fieldfile");
    let field = dir.join("field.json");
    fs::write(
        &field,
        r#"{"coeffs":[{"n":2,"re":0.0,"im":-0.5},{"n":-2,"re":0.0,"im":0.5}],
            "envelope":{"D":null,"r":0.5}}"#,
    )
    .unwrap();
    let config = dir.join("run.toml");
    fs::write(
        &config,
        format!(
            "field_file = \"{}\"\nx0 = [0.3]\nmethod = \"reference\"\nt_end = 0.1\nsamples = 5\n",
            field.display()
        ),
    )
    .unwrap();
    let out_path = dir.join("traj.csv");
    // flag overrides the config's sample count
    let out = run(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--samples",
        "9",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_ok(&out);
    assert_eq!(fs::read_to_string(&out_path).unwrap().lines().count(), 10);
}

#[test]
fn multi_field_file_carleman_fourier() {
    let dir = workdir("multifield");
    let field = dir.join("field.json");
    fs::write(
        &field,
        r#"{"d":1,"L":2,"taus":[1.0,1.4142135623730951],
            "coeffs":[{"p":1,"alphas":[[0],[0]],"re":0.5,"im":0.0},
                      {"p":1,"alphas":[[1],[0]],"re":0.0,"im":-0.15},
                      {"p":1,"alphas":[[-1],[0]],"re":0.0,"im":0.15},
                      {"p":1,"alphas":[[0],[1]],"re":0.0,"im":-0.1},
                      {"p":1,"alphas":[[0],[-1]],"re":0.0,"im":0.1}],
            "envelope":{"D":null,"r":0.5}}"#,
    )
    .unwrap();
    let out_path = dir.join("traj.csv");
    let out = run(&[
        "simulate",
        "--field-file",
        field.to_str().unwrap(),
        "--x0",
        "0.8",
        "--method",
        "carleman-fourier",
        "-N",
        "4",
        "--t-end",
        "0.2",
        "--samples",
        "21",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_ok(&out);
    let csv = fs::read_to_string(&out_path).unwrap();
    assert_eq!(csv.lines().count(), 22);
    // grade-1 block of the m = 4 lift: 4 complex components minimum
    assert!(csv.lines().next().unwrap().contains("comp3_re"));
}
