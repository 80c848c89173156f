use std::fs;
use std::path::Path;
use std::process::Command;

use k3limit_cli::Summary;

fn k3limit(out: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_k3limit"));
    cmd.arg("--out").arg(out);
    for var in ["K3LIMIT_CONFIG", "K3LIMIT_OUT", "K3LIMIT_CACHE", "K3LIMIT_SEED", "K3LIMIT_JOBS"] {
        cmd.env_remove(var);
    }
    cmd
}

fn status(cmd: &mut Command) -> i32 {
    cmd.output().expect("run k3limit").status.code().expect("exit code")
}

fn summary(dir: &Path, stem: &str) -> Summary {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json"))).unwrap()).unwrap()
}

#[test]
fn cusp_model_classification_lists_a_type_ii_fiber() {
    let dir = tempfile::tempdir().unwrap();
    let fib = dir.path().join("cusp.json");
    fs::write(&fib, r#"{"label": "cusp", "a": [], "b": [[-1, 0], [1, 0]]}"#).unwrap();
    let cfg = dir.path().join("job.json");
    fs::write(&cfg, r#"{"fibration": "cusp.json"}"#).unwrap();
    let out = dir.path().join("out");
    assert_eq!(status(k3limit(&out).arg("--config").arg(&cfg).args(["fibration", "classify"])), 0);
    let csv = fs::read_to_string(out.join("fibers.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# seed=8"));
    assert!(lines.next().unwrap().starts_with("location_re,location_im"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!((row[0].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(row[5], "II");
    let s = summary(&out, "fibration_classify");
    assert!(s.pass);
    assert_eq!(s.fibration.as_deref(), Some("cusp"));
    assert_eq!(s.results["types"]["II"], 1);
}

#[test]
fn report_on_an_empty_directory_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(status(k3limit(dir.path()).arg("report")), 2);
    assert_eq!(status(k3limit(&dir.path().join("missing")).arg("report")), 2);
}

#[test]
fn invalid_configurations_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.json");
    fs::write(&cfg, r#"{"sk": {"hessian_tolerance": -1e-5}}"#).unwrap();
    assert_eq!(status(k3limit(dir.path()).arg("--config").arg(&cfg).args(["sk", "check"])), 2);
    fs::write(&cfg, "{not json").unwrap();
    assert_eq!(status(k3limit(dir.path()).arg("--config").arg(&cfg).args(["sk", "check"])), 2);
    assert_eq!(status(k3limit(dir.path()).args(["periods", "frobnicate"])), 2);
    assert_eq!(status(k3limit(dir.path()).args(["--jobs", "0", "periods", "sample"])), 2);
    let missing = dir.path().join("nowhere.json");
    assert_eq!(status(k3limit(dir.path()).arg("--config").arg(&missing).args(["periods", "sample"])), 2);
}

#[test]
fn failed_contracts_exit_1_with_a_failure_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.json");
    // no slope is within 1e-9 of 0.4
    fs::write(&cfg, r#"{"semiflat": {"expected_slope": 0.4, "slope_tolerance": 1e-9}}"#).unwrap();
    let output = k3limit(dir.path()).arg("--config").arg(&cfg).args(["semiflat", "scaling"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    let stderr = String::from_utf8(output.stderr).unwrap();
    let failures: serde_json::Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(failures["failures"].as_array().unwrap().len(), 1);
    let s = summary(dir.path(), "semiflat_scaling");
    assert!(!s.pass);
    assert_eq!(s.failures.len(), 1);
    assert_eq!(status(k3limit(dir.path()).arg("report")), 1);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
}

#[test]
fn environment_overrides_mirror_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.json");
    fs::write(&cfg, r#"{"periods": {"samples": 20}}"#).unwrap();
    let code = status(
        k3limit(dir.path())
            .env("K3LIMIT_CONFIG", &cfg)
            .env("K3LIMIT_SEED", "42")
            .env("K3LIMIT_CACHE", "off")
            .env("K3LIMIT_JOBS", "1")
            .args(["periods", "sample"]),
    );
    assert_eq!(code, 0);
    let s = summary(dir.path(), "periods_sample");
    assert_eq!(s.seed, 42);
    assert_eq!(s.results["samples"], 20);
    assert!(!dir.path().join("periods_cache.jsonl").exists());
    let csv = fs::read_to_string(dir.path().join("periods.csv")).unwrap();
    assert!(csv.starts_with("# seed=42\n"));
}

#[test]
fn seeds_change_samples_and_repeat_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.json");
    fs::write(&cfg, r#"{"periods": {"samples": 30}}"#).unwrap();
    let run = |seed: &str, out: &str| {
        let out = dir.path().join(out);
        let code = status(k3limit(&out).arg("--config").arg(&cfg).args(["--seed", seed, "periods", "sample"]));
        assert_eq!(code, 0);
        fs::read_to_string(out.join("periods.csv")).unwrap()
    };
    let (a, b, c) = (run("1", "a"), run("1", "b"), run("2", "c"));
    assert_eq!(a, b);
    assert_ne!(a.lines().nth(2), c.lines().nth(2));
}
