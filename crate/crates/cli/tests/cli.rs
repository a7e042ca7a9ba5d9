//! End-to-end tests of the `oocl` binary: file setup, fitting, prediction,
//! cross-validation, and exit-code behavior.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn oocl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oocl"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to launch oocl")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Deterministic small regression instance written as CSV + response file.
/// Returns (csv path, y path, n, p).
fn write_instance(dir: &Path, header: bool) -> (PathBuf, PathBuf, usize, usize) {
    let n = 40;
    let p = 8;
    // a fixed quadratic-residue style pattern; no RNG needed
    let x = |i: usize, j: usize| -> f64 {
        let v = ((i * 31 + j * 17 + 7) % 23) as f64 / 23.0 - 0.5;
        v * (1.0 + j as f64 / 10.0)
    };
    let mut csv = String::new();
    if header {
        let names: Vec<String> = (0..p).map(|j| format!("feat{j}")).collect();
        csv.push_str(&names.join(","));
        csv.push('\n');
    }
    let mut y = String::new();
    for i in 0..n {
        let row: Vec<String> = (0..p).map(|j| format!("{}", x(i, j))).collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
        // response driven by two features plus a small deterministic residual
        let noise = (((i * 13 + 5) % 11) as f64 / 11.0 - 0.5) * 0.1;
        y.push_str(&format!("{}\n", 2.0 * x(i, 1) - 1.5 * x(i, 4) + noise));
    }
    let csv_path = dir.join("data.csv");
    let y_path = dir.join("y.txt");
    std::fs::write(&csv_path, csv).unwrap();
    std::fs::write(&y_path, y).unwrap();
    (csv_path, y_path, n, p)
}

#[test]
fn setup_creates_files_and_reports_dims() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _, n, p) = write_instance(dir.path(), false);
    let out = oocl(&["setup", csv.to_str().unwrap(), "--out", "data"], dir.path());
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains(&format!("{n} rows x {p} cols")), "{stdout}");
    assert!(dir.path().join("data.bin").exists());
    assert!(dir.path().join("data.desc").exists());
}

#[test]
fn setup_records_header_names() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _, _, _) = write_instance(dir.path(), true);
    let out = oocl(&["setup", csv.to_str().unwrap(), "--out", "data"], dir.path());
    assert_ok(&out);
    let desc = std::fs::read_to_string(dir.path().join("data.desc")).unwrap();
    assert!(desc.contains("feat0") && desc.contains("feat7"), "{desc}");
}

#[test]
fn setup_missing_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = oocl(&["setup", "nope.csv", "--out", "data"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("nope.csv"), "{stderr}");
}

fn setup_fixture(dir: &Path, header: bool) -> (String, String) {
    let (csv, y, _, _) = write_instance(dir, header);
    let out = oocl(&["setup", csv.to_str().unwrap(), "--out", "data"], dir);
    assert_ok(&out);
    (
        dir.join("data.desc").to_str().unwrap().to_string(),
        y.to_str().unwrap().to_string(),
    )
}

#[test]
fn fit_writes_path_files() {
    let dir = tempfile::tempdir().unwrap();
    let (desc, y) = setup_fixture(dir.path(), false);
    let out = oocl(
        &["fit", &desc, &y, "--nlambda", "25", "--out", "model"],
        dir.path(),
    );
    assert_ok(&out);
    let coefs = std::fs::read_to_string(dir.path().join("model.coef.csv")).unwrap();
    assert!(coefs.starts_with("lambda,col_index,col_name,coef\n"));
    // 25 intercept rows, one per path point
    let intercepts = coefs.matches("(Intercept)").count();
    assert_eq!(intercepts, 25);
    assert!(dir.path().join("model.fit.json").exists());
}

#[test]
fn fit_nlambda_1_is_null_model() {
    let dir = tempfile::tempdir().unwrap();
    let (desc, y) = setup_fixture(dir.path(), false);
    let out = oocl(
        &["fit", &desc, &y, "--nlambda", "1", "--out", "null"],
        dir.path(),
    );
    assert_ok(&out);
    let coefs = std::fs::read_to_string(dir.path().join("null.coef.csv")).unwrap();
    let lines: Vec<&str> = coefs.lines().collect();
    assert_eq!(lines.len(), 2, "{coefs}"); // header + single intercept row
    assert!(lines[1].contains("(Intercept)"));
}

#[test]
fn fit_ncores_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (desc, y) = setup_fixture(dir.path(), false);
    for (cores, name) in [("1", "a"), ("4", "b")] {
        let out = oocl(
            &[
                "fit", &desc, &y, "--nlambda", "20", "--ncores", cores, "--out", name,
            ],
            dir.path(),
        );
        assert_ok(&out);
    }
    let a = std::fs::read(dir.path().join("a.coef.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.coef.csv")).unwrap();
    assert_eq!(a, b, "worker count changed the serialized coefficients");
}

#[test]
fn predict_and_coef_queries() {
    let dir = tempfile::tempdir().unwrap();
    let (desc, y) = setup_fixture(dir.path(), true);
    let out = oocl(
        &["fit", &desc, &y, "--nlambda", "20", "--out", "model"],
        dir.path(),
    );
    assert_ok(&out);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("model.fit.json")).unwrap())
            .unwrap();
    let lambdas = meta["lambda"].as_array().unwrap();
    let lam_max = lambdas[0].as_f64().unwrap();
    let lam_small = lambdas[lambdas.len() - 1].as_f64().unwrap();

    // nvars at lambda_max is zero
    let out = oocl(
        &[
            "predict", "model", "--lambda", &lam_max.to_string(), "--type", "nvars",
        ],
        dir.path(),
    );
    assert_ok(&out);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "0");

    // coef lists the intercept first, then named features
    let out = oocl(
        &["coef", "model", "--lambda", &lam_small.to_string()],
        dir.path(),
    );
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert!(lines[0].starts_with("lambda="));
    assert!(lines[1].starts_with("(Intercept),"));
    assert!(lines.len() > 2, "expected nonzero coefficients:\n{stdout}");
    assert!(lines[2].starts_with("feat"), "{stdout}");

    // class predictions emit one 0/1 per row
    let out = oocl(
        &[
            "predict", "model", "--lambda", &lam_small.to_string(), "--type", "class",
            "--data", &desc,
        ],
        dir.path(),
    );
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let classes: Vec<&str> = stdout.lines().collect();
    assert_eq!(classes.len(), 40);
    assert!(classes.iter().all(|c| *c == "0" || *c == "1"));

    // lambda outside the fitted range is an input error
    let out = oocl(&["predict", "model", "--lambda", "99", "--type", "nvars"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cv_summary_block_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let (desc, y) = setup_fixture(dir.path(), false);
    let run = |name: &str| {
        let out = oocl(
            &[
                "cv", &desc, &y, "--nlambda", "20", "--folds", "4", "--seed", "9",
                "--out", name,
            ],
            dir.path(),
        );
        assert_ok(&out);
        String::from_utf8_lossy(&out.stdout).into_owned()
    };
    let first = run("cv1");
    for field in [
        "Nonzero coefficients:",
        "Cross-validation error (MSE):",
        "R-squared:",
        "Signal-to-noise ratio:",
        "Prediction error:",
        "At minimum cross-validation error (lambda=",
    ] {
        assert!(first.contains(field), "missing {field:?} in:\n{first}");
    }
    let second = run("cv2");
    assert_eq!(first, second, "same seed must reproduce the summary");
    let curve = std::fs::read_to_string(dir.path().join("cv1.cv.csv")).unwrap();
    assert!(curve.starts_with("lambda,cve,cvse\n"));
    assert_eq!(curve.lines().count(), 21);
}

#[test]
fn validate_and_bench_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = oocl(
        &[
            "validate", "--n", "30", "--p", "40", "--seeds", "2", "--nlambda", "10",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Maximum:"), "{stdout}");

    let out = oocl(
        &[
            "bench", "--rejection", "--n", "60", "--p", "80", "--nlambda", "10",
            "--ntrue", "5", "--out", "rej.csv",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let rej = std::fs::read_to_string(dir.path().join("rej.csv")).unwrap();
    assert!(rej.starts_with("lambda_ratio,pct_bedpp,pct_ssr,pct_hybrid\n"));

    let out = oocl(
        &[
            "bench", "--case", "appendix2", "--n", "60", "--p", "80", "--nlambda", "10",
            "--ntrue", "5",
        ],
        dir.path(),
    );
    assert_ok(&out);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("policy,wall_secs,total_scans"), "{table}");
    assert!(table.contains("ssr") && table.contains("hybrid"), "{table}");
}
