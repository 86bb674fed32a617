use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn torcom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torcom"))
        .args(args)
        .env_remove("TORCOM_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap()
}

fn results_dir(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr)
        .lines()
        .find_map(|l| l.strip_prefix("results: ").map(str::to_string))
        .unwrap()
}

#[test]
fn translation_estimate_reports_table_value() {
    let out = tempfile::tempdir().unwrap();
    let o = torcom(&[
        "estimate", "--system", "translation", "--a", "0.123,0,0", "--modes", "1,0,0", "--n", "2000", "--seed", "42",
        "--out", out.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let s = stdout_json(&o);
    assert!((s["estimate"]["value"].as_f64().unwrap() - 0.449882).abs() < 5e-7);
    assert_eq!(s["estimate"]["std_error"].as_f64().unwrap(), 0.0);
    let d = results_dir(&o);
    assert!(Path::new(&d).starts_with(out.path().join("estimate")));
}

#[test]
fn missing_system_exits_2_and_lists_systems() {
    let o = torcom(&["estimate", "--K", "2", "--out", "unused"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["error"]["kind"], "config");
    let valid: Vec<_> = e["error"]["valid_systems"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(valid.contains(&"abc") && valid.contains(&"hou_luo"));
    assert!(!Path::new("unused").exists());
}

#[test]
fn invalid_values_exit_2() {
    for args in [
        &["estimate", "--system", "abc", "--n", "0"][..],
        &["estimate", "--system", "translation"],
        &["estimate", "--system", "hou_luo", "--a", "-1"],
        &["estimate", "--system", "warp"],
        &["experiment", "table9"],
        &["experiment", "table1_sanity", "--set", "colour=red"],
    ] {
        let o = torcom(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(stderr_json(&o)["error"]["message"].is_string());
    }
}

#[test]
fn abc_estimate_is_rerun_identical_across_threads() {
    let out = tempfile::tempdir().unwrap();
    let root = out.path().to_str().unwrap();
    let base = ["estimate", "--system", "abc", "--A", "1", "--B", "1", "--C", "1", "--K", "2", "--h", "1", "--n", "3000", "--seed", "7", "--out", root];
    let a = torcom(&[&base[..], &["--threads", "1"]].concat());
    let b = torcom(&[&base[..], &["--threads", "4"]].concat());
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    let dir = results_dir(&a);
    let r = torcom(&["rerun", &format!("{dir}/manifest.json"), "--threads", "3"]);
    assert!(r.status.success());
    assert_eq!(
        std::fs::read(format!("{dir}/summary.json")).unwrap(),
        std::fs::read(format!("{}/summary.json", results_dir(&r))).unwrap()
    );
}

#[test]
fn flags_override_the_config_file() {
    let out = tempfile::tempdir().unwrap();
    let cfg = out.path().join("run.toml");
    std::fs::write(&cfg, "[system]\nkind = \"abc\"\nA = 1.0\nB = 1.0\nC = 1.0\n[quadrature]\nn = 100\nseed = 5\n").unwrap();
    let o = torcom(&["estimate", "--config", cfg.to_str().unwrap(), "--B", "0.5", "--n", "64", "--dry-run"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(text.contains("B = 0.5"), "{text}");
    assert!(text.contains("n = 64"), "{text}");
    assert!(text.contains("seed = 5"), "{text}");
}

#[test]
fn env_var_sets_the_default_results_root() {
    let out = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_torcom"))
        .args(["estimate", "--system", "identity", "--dim", "2", "--n", "16"])
        .env("TORCOM_OUT_DIR", out.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(Path::new(&results_dir(&o)).starts_with(out.path()));
    assert_eq!(stdout_json(&o)["estimate"]["value"].as_f64(), Some(0.0));
}

#[test]
fn experiment_prints_pass_lines() {
    let out = tempfile::tempdir().unwrap();
    let o = torcom(&["experiment", "table1_sanity", "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(text.lines().any(|l| l.starts_with("PASS translation")));
    assert!(text.lines().any(|l| l.starts_with("PASS cat_map")));
    let d = results_dir(&o);
    for f in ["summary.json", "series.csv", "diagnostics.json", "manifest.json"] {
        assert!(Path::new(&d).join(f).is_file());
    }
}

#[test]
fn commutator_suite_reports_residuals() {
    let out = tempfile::tempdir().unwrap();
    let o = torcom(&["experiment", "commutator_identity_suite", "--out", out.path().to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(text.contains("max residual"), "{text}");
}

#[test]
fn help_documents_config_keys() {
    let o = torcom(&["estimate", "--help"]);
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    for key in ["[system]", "[family]", "[quadrature]", "[time]", "[integrator]", "[output]", "[diagnostics]", "[run]", "TORCOM_OUT_DIR"] {
        assert!(text.contains(key), "{key}");
    }
}
