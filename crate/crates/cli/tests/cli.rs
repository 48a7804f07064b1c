use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn sis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sis"))
        .args(args)
        .env_remove("SIS_LOG_LEVEL")
        .output()
        .expect("binary runs")
}

fn cfg(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_column(path: &Path, column: &str) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == column).unwrap();
    // Patterns contain commas; count columns from the right.
    let from_right = header.len() - idx;
    lines
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            cells[cells.len() - from_right].to_string()
        })
        .collect()
}

#[test]
fn predict_writes_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("two-pump");
    let o = sis(&[
        "predict",
        "--config",
        &cfg("eq3.json"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in [
        "config.json",
        "jsa.csv",
        "jsa.json",
        "twofold.csv",
        "fourfold.csv",
        "comparison.csv",
        "report.json",
        "fourfold.svg",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let ratios = csv_column(&out.join("comparison.csv"), "ratio_exact");
    assert_eq!(ratios.len(), 6);
    assert!(ratios
        .iter()
        .any(|r| (r.parse::<f64>().unwrap() - 25.0 / 17.0).abs() < 1e-9));
    let leftovers: Vec<_> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n.to_string_lossy().starts_with(".sis-staging"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn missing_config_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = sis(&[
        "predict",
        "--config",
        "missing.json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("missing.json"), "{err}");
    assert!(!out.exists());
}

#[test]
fn invalid_override_leaves_no_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = sis(&[
        "sample",
        "--config",
        &cfg("eq5.json"),
        "--out",
        out.to_str().unwrap(),
        "gain=1.5",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("gain"));
    assert!(!out.exists());
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn verify_reports_deviation() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sis(&[
        "verify",
        "--config",
        &cfg("eq5.json"),
        "--out",
        tmp.path().join("v").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("max deviation"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("v/verify.json")).unwrap())
            .unwrap();
    assert!(report["max_relative_deviation"].as_f64().unwrap() < 1e-9);
}

#[test]
fn seed_changes_samples_not_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |seed: &str| {
        let out = tmp.path().join(seed);
        let o = sis(&[
            "sample",
            "--config",
            &cfg("eq3.json"),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
            "--shots",
            "100000",
            "gain=0.3",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("1"), run("2"));
    let twofold = |d: &Path, col| csv_column(&d.join("twofold.csv"), col);
    assert_ne!(twofold(&a, "raw_count"), twofold(&b, "raw_count"));
    assert_eq!(twofold(&a, "quantum_pred"), twofold(&b, "quantum_pred"));
    assert_eq!(
        csv_column(&a.join("fourfold.csv"), "classical_pred"),
        csv_column(&b.join("fourfold.csv"), "classical_pred")
    );
    let again = tmp.path().join("again");
    let o = sis(&[
        "sample",
        "--config",
        &cfg("eq3.json"),
        "--out",
        again.to_str().unwrap(),
        "--seed",
        "1",
        "--shots",
        "100000",
        "gain=0.3",
    ]);
    assert!(o.status.success());
    for f in ["twofold.csv", "fourfold.csv", "report.json", "config.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(again.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn rerun_into_existing_directory_replaces_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = sis(&[
        "predict",
        "--config",
        &cfg("eq2.json"),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(o.status.success());
    assert!(!out.join("report.json").exists());
    let o = sis(&[
        "predict",
        "--config",
        &cfg("eq5.json"),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(o.status.success());
    assert!(out.join("report.json").is_file());
    let report = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("three-pump"));
}

#[test]
fn sweep_and_jsa_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let o = sis(&[
        "sweep",
        "--config",
        &cfg("sweep.json"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 41);
    assert!(out.join("sweep.svg").is_file());

    let out = tmp.path().join("jsa");
    let o = sis(&[
        "jsa",
        "--config",
        &cfg("eq3.json"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("i1,1+0j,2+0j,1+0j,0+0j"), "{stdout}");
}

#[test]
fn report_prints_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sis(&[
        "report",
        "--config",
        &cfg("eq5.json"),
        "--out",
        tmp.path().join("r").to_str().unwrap(),
        "--exact",
    ]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.matches("constructive").count(), 2, "{stdout}");
    assert!(stdout.contains("config_sha256="));
}
