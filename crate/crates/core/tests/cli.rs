use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_dirichlet-p");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_config(cmd: &str, config: &Path, extra: &[&str]) -> (i32, Option<Value>, String) {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = run(&args);
    let report = std::fs::read_to_string(&out).ok().map(|s| serde_json::from_str(&s).unwrap());
    (o.status.code().unwrap(), report, String::from_utf8_lossy(&o.stderr).into_owned())
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn every_example_config_succeeds() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let cmd = path.file_name().unwrap().to_str().unwrap().split('_').next().unwrap().to_string();
        let (code, report, err) = run_config(&cmd, &path, &[]);
        assert_eq!(code, 0, "{}: {err}", path.display());
        let r = report.unwrap();
        for key in ["inputs", "values", "slack", "tolerance", "pass"] {
            assert!(r.get(key).is_some(), "{} lacks {key}", path.display());
        }
        assert_eq!(r["pass"], Value::Bool(true));
        seen += 1;
    }
    assert!(seen >= 6);
}

#[test]
fn interval_capacity_is_sixteen() {
    let (code, r, _) = run_config("capacity", &configs().join("capacity_interval.json"), &[]);
    assert_eq!(code, 0);
    let cap = r.unwrap()["values"]["capacity"].as_f64().unwrap();
    assert!((cap - 16.0).abs() <= 1e-8, "{cap}");
}

#[test]
fn conformal_power_map_summary() {
    let (code, r, _) = run_config("qr", &configs().join("qr_power2.json"), &[]);
    assert_eq!(code, 0);
    let s = &r.unwrap()["values"]["summary"];
    assert!((s["k_outer"].as_f64().unwrap() - 1.0).abs() <= 1e-10);
    assert!((s["k_inner"].as_f64().unwrap() - 1.0).abs() <= 1e-10);
    assert!(s["max_theta_identity_deviation"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    for name in ["check_suites.json", "capacity_annulus.json", "caccioppoli_re_z2.json", "solve_re_z2.json"] {
        let path = configs().join(name);
        let cmd = name.split('_').next().unwrap();
        let outputs: Vec<Vec<u8>> = ["1", "3"]
            .iter()
            .map(|t| {
                let o = run(&[cmd, "--config", path.to_str().unwrap(), "--threads", t]);
                assert_eq!(o.status.code(), Some(0));
                o.stdout
            })
            .collect();
        assert_eq!(outputs[0], outputs[1], "{name}");
    }
}

#[test]
fn missing_p_is_a_config_error_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"domain":{"dim":1,"extent":[[0,1]],"shape":[9]}}"#);
    let (code, report, err) = run_config("solve", &cfg, &[]);
    assert_eq!(code, 1);
    assert!(report.is_none());
    assert!(err.contains("`p`"), "{err}");
}

#[test]
fn unknown_keys_and_mismatched_commands_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"domain":{"dim":1,"extent":[[0,1]],"shape":[9]},"p":2,"colour":1}"#);
    assert_eq!(run_config("solve", &cfg, &[]).0, 1);
    assert_eq!(run_config("capacity", &configs().join("qr_power2.json"), &[]).0, 1);
    assert_eq!(run(&["solve"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn qr_requires_p_equal_to_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"domain":{"dim":2,"extent":[[-1,1],[-1,1]],"shape":[9,9]},"p":3,"mapping":{"kind":"power","k":2}}"#,
    );
    assert_eq!(run_config("qr", &cfg, &[]).0, 1);
}

#[test]
fn non_convergence_exits_two_with_trace() {
    let (code, r, err) = run_config("solve", &configs().join("solve_re_z2.json"), &["--tol", "1e-14"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(r.unwrap()["inputs"]["solver"]["grad_tol"].as_f64(), Some(1e-14));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"domain":{"dim":2,"extent":[[-1,1],[-1,1]],"shape":[33,33]},"p":4,
            "boundary":{"type":"complex_power","k":2},"solver":{"max_iter":1}}"#,
    );
    let (code, r, _) = run_config("solve", &cfg, &[]);
    assert_eq!(code, 2);
    let r = r.unwrap();
    assert_eq!(r["pass"], Value::Bool(false));
    assert!(!r["values"]["energy_trace"].as_array().unwrap().is_empty());
}

#[test]
fn overflow_is_a_computation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"domain":{"dim":1,"extent":[[0,1]],"shape":[9]},"p":400,"boundary":{"type":"affine","coeffs":[1000],"offset":0}}"#,
    );
    let (code, _, err) = run_config("solve", &cfg, &[]);
    assert_eq!(code, 2);
    assert!(err.contains("overflows"), "{err}");
}

#[test]
fn failed_property_exits_three() {
    // Strong random anisotropy: the cutoff's cell gradients exceed the
    // isotropic metrication bound.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"domain":{"dim":2,"extent":[[0,1],[0,1]],"shape":[21,21],"field":"random:0.2:5"},"p":2,
            "metric":{"source":[0.5,0.5],"cutoff_radius":0.3}}"#,
    );
    let (code, r, _) = run_config("metric", &cfg, &[]);
    assert_eq!(code, 3);
    let r = r.unwrap();
    assert_eq!(r["pass"], Value::Bool(false));
    assert!(r["slack"].as_f64().unwrap() < 0.0);
}

#[test]
fn seed_override_changes_random_fields() {
    let path = configs().join("check_suites.json");
    let a = run(&["check", "--config", path.to_str().unwrap()]).stdout;
    let b = run(&["check", "--config", path.to_str().unwrap(), "--seed", "8"]).stdout;
    assert_ne!(a, b);
}

#[test]
fn csv_export_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let path = configs().join("solve_re_z2.json");
    let o = run(&["solve", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--csv"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.with_extension("csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("x0,x1,u"));
    assert_eq!(lines.count(), 33 * 33);
}
