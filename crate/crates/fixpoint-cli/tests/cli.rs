use assert_cmd::Command;
use predicates::prelude::*;
use std::path::{Path, PathBuf};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cmd(out: &Path) -> Command {
    let mut c = Command::cargo_bin("fixpoint").unwrap();
    c.env("FIXPOINT_OUTPUT_ROOT", out);
    c
}

#[test]
fn run_produces_bundle_with_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    cmd(tmp.path())
        .args(["run"])
        .arg(configs_dir().join("standard-ko.toml"))
        .assert()
        .success();
    let bundle = tmp.path().join("standard-ko");
    for f in ["traces.json", "analysis.json", "manifest.json"] {
        assert!(bundle.join(f).is_file(), "missing {f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(bundle.join("manifest.json")).unwrap())
            .unwrap();
    let files = manifest["files"].as_object().unwrap();
    assert!(files.contains_key("traces.json"));
    assert!(files.contains_key("analysis.json"));
    for hash in files.values() {
        assert_eq!(hash.as_str().unwrap().len(), 64);
    }
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for out in [a.path(), b.path()] {
        cmd(out)
            .args(["run"])
            .arg(configs_dir().join("standard-ko-vs-cr.toml"))
            .assert()
            .success();
        cmd(out)
            .args(["report"])
            .arg(out.join("standard-ko-vs-cr"))
            .args(["--format", "csv"])
            .assert()
            .success();
        cmd(out)
            .args(["report"])
            .arg(out.join("standard-ko-vs-cr"))
            .args(["--format", "svg"])
            .assert()
            .success();
    }
    for f in [
        "traces.json",
        "analysis.json",
        "manifest.json",
        "trace-ko.csv",
        "trace-cr.csv",
        "plot.svg",
    ] {
        let x = std::fs::read(a.path().join("standard-ko-vs-cr").join(f)).unwrap();
        let y = std::fs::read(b.path().join("standard-ko-vs-cr").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between identical runs");
    }
}

#[test]
fn csv_has_26_rows_for_the_25_iterate_run() {
    let tmp = tempfile::tempdir().unwrap();
    cmd(tmp.path())
        .args(["run"])
        .arg(configs_dir().join("standard-ko.toml"))
        .assert()
        .success();
    let bundle = tmp.path().join("standard-ko");
    cmd(tmp.path())
        .args(["report"])
        .arg(&bundle)
        .args(["--format", "csv"])
        .assert()
        .success();
    let csv = std::fs::read_to_string(bundle.join("trace-ko.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 26);
    assert_eq!(
        lines[0],
        "n,x0,error,residual,exp_bound,a_n,b_n,theta_n"
    );
}

#[test]
fn csv_numeric_fields_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    cmd(tmp.path())
        .args(["run"])
        .arg(configs_dir().join("standard-ko.toml"))
        .assert()
        .success();
    let bundle = tmp.path().join("standard-ko");
    cmd(tmp.path())
        .args(["report"])
        .arg(&bundle)
        .args(["--format", "csv"])
        .assert()
        .success();
    let csv = std::fs::read_to_string(bundle.join("trace-ko.csv")).unwrap();
    for line in csv.lines().skip(1) {
        for field in line.split(',').skip(1).filter(|f| !f.is_empty()) {
            let value: f64 = field.parse().unwrap();
            assert_eq!(format!("{value}"), field, "field does not round-trip");
        }
    }
}

#[test]
fn svg_has_one_polyline_and_legend_entry_per_scheme() {
    let tmp = tempfile::tempdir().unwrap();
    cmd(tmp.path())
        .args(["run"])
        .arg(configs_dir().join("standard-ko-vs-cr.toml"))
        .assert()
        .success();
    let bundle = tmp.path().join("standard-ko-vs-cr");
    cmd(tmp.path())
        .args(["report"])
        .arg(&bundle)
        .args(["--format", "svg"])
        .assert()
        .success();
    let svg = std::fs::read_to_string(bundle.join("plot.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains(">cr</text>"));
    assert!(svg.contains(">ko</text>"));
}

#[test]
fn malformed_configs_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let empty_schemes = tmp.path().join("empty.toml");
    std::fs::write(
        &empty_schemes,
        r#"
name = "empty"
[problem]
kind = "affine"
matrix = [[0.5]]
offset = [1.0]
[schedule]
kind = "constant"
values = [0.5, 0.5, 0.5]
[run]
schemes = []
x0 = [0.0]
max_iterations = 10
"#,
    )
    .unwrap();
    cmd(tmp.path())
        .args(["run"])
        .arg(&empty_schemes)
        .assert()
        .code(2)
        .stderr(predicate::str::contains("scheme list is empty"));

    let unknown_field = tmp.path().join("unknown.toml");
    std::fs::write(
        &unknown_field,
        r#"
name = "unknown"
surprise = 1
[problem]
kind = "affine"
matrix = [[0.5]]
offset = [1.0]
[schedule]
kind = "constant"
values = [0.5, 0.5, 0.5]
[run]
schemes = ["ko"]
x0 = [0.0]
max_iterations = 10
"#,
    )
    .unwrap();
    cmd(tmp.path()).args(["run"]).arg(&unknown_field).assert().code(2);

    cmd(tmp.path())
        .args(["run"])
        .arg(tmp.path().join("does-not-exist.toml"))
        .assert()
        .code(2);
}

#[test]
fn inadmissible_datadep_schedule_exits_with_code_3() {
    let tmp = tempfile::tempdir().unwrap();
    cmd(tmp.path())
        .args(["run"])
        .arg(configs_dir().join("datadep-inadmissible.toml"))
        .assert()
        .code(3)
        .stderr(predicate::str::contains("alpha_n^1 >= 1/2"));
}

#[test]
fn seed_override_changes_the_datadep_shift() {
    let tmp = tempfile::tempdir().unwrap();
    cmd(tmp.path())
        .args(["run"])
        .arg(configs_dir().join("datadep-standard.toml"))
        .assert()
        .success();
    let first =
        std::fs::read_to_string(tmp.path().join("datadep-standard/analysis.json")).unwrap();
    cmd(tmp.path())
        .args(["run"])
        .arg(configs_dir().join("datadep-standard.toml"))
        .args(["--seed", "99"])
        .assert()
        .success();
    let second =
        std::fs::read_to_string(tmp.path().join("datadep-standard/analysis.json")).unwrap();
    assert_ne!(first, second);

    let v: serde_json::Value = serde_json::from_str(&second).unwrap();
    assert!(v["datadep"]["margin"].as_f64().unwrap() >= 0.0);
}

#[test]
fn rate_classification_in_bundled_config_favors_cr() {
    let tmp = tempfile::tempdir().unwrap();
    cmd(tmp.path())
        .args(["run"])
        .arg(configs_dir().join("standard-ko-vs-cr.toml"))
        .assert()
        .success();
    let analysis: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("standard-ko-vs-cr/analysis.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(analysis["rates"]["classification"], "FirstFaster");
    assert_eq!(analysis["rates"]["first_scheme"], "cr");
    let theta = analysis["bounds"]["theta_step_ratio"].as_f64().unwrap();
    assert!((theta - 21.0 / 23.0).abs() < 1e-12);
}

#[test]
fn verify_prints_one_line_per_criterion() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cmd(tmp.path()).arg("verify").assert().success();
    let stdout = String::from_utf8(out.get_output().stdout.clone()).unwrap();
    let lines: Vec<&str> = stdout.lines().filter(|l| l.starts_with("PASS")).collect();
    assert_eq!(lines.len(), 9);
}
