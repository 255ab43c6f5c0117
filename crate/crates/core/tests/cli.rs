use std::path::Path;
use std::process::{Command, Output};

use sobolev_abp::cli::config::sha256_hex;

const BIN: &str = env!("CARGO_BIN_EXE_sobolev-abp");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const ABP_SMALL: &str = r#"{
  "pipeline": "abp-full",
  "scenarios": ["flat-disk-equality"],
  "resolutions": [33],
  "seed": 11,
  "samples": {"coverage": 200, "jacobian": 2000, "fd_jacobian": 20}
}"#;

#[test]
fn list_scenarios_prints_catalog() {
    let out = run(&["list-scenarios"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["flat-disk-equality", "sphere-codim1-lift", "disconnected-two-disks", "flat-cube-3d"] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn inequality_run_writes_tagged_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"pipeline": "inequality", "scenarios": ["flat-disk-equality", "flat-square"], "resolutions": [17, 33]}"#;
    let cfg = write(dir.path(), "c.json", text);
    let out_dir = dir.path().join("out");
    let out = run(&["run", &cfg, "--seed", "5", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = std::fs::read_to_string(out_dir.join("sobolev.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario,n,m,resolution,lhs_interior,lhs_boundary,rhs_integral,constant,ratio,eps_mesh,seed,config_sha256"
    );
    let sha = sha256_hex(text.as_bytes());
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.ends_with(&format!(",5,{sha}"))));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config_sha256"], sha);
    assert_eq!(report["seed"], 5);
    assert_eq!(report["passed"], true);
    for f in ["abp_sweep.csv", "coverage.csv"] {
        assert!(out_dir.join(f).exists());
    }
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown-field.json", r#"{"pipeline": "inequality", "scenarios": ["flat-square"], "extra": 1}"#),
        ("unknown-builtin.json", r#"{"pipeline": "inequality", "scenarios": ["no-such-surface"]}"#),
        ("bad-pipeline.json", r#"{"pipeline": "everything", "scenarios": ["flat-square"]}"#),
        ("not-json.json", "{"),
        ("two-components.json", r#"{"pipeline": "abp-full", "scenarios": ["disconnected-two-disks"]}"#),
        ("even-resolution.json", r#"{"pipeline": "abp-full", "scenarios": ["flat-square"], "resolutions": [32]}"#),
        ("short-study.json", r#"{"pipeline": "convergence", "scenarios": ["flat-square"], "resolutions": [17, 33]}"#),
        ("rigidity-two-components.json", r#"{"pipeline": "rigidity", "scenarios": ["disconnected-two-disks"]}"#),
    ];
    for (name, text) in cases {
        let cfg = write(dir.path(), name, text);
        let out = run(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(run(&["run", "/nonexistent/config.json"]).status.code(), Some(2));
    assert_eq!(run(&["convergence", "nope", "--resolutions", "9,17,33"]).status.code(), Some(2));
}

#[test]
fn failed_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // the anisotropic disk is not an equality case, so a tiny threshold fails
    let text = r#"{"pipeline": "rigidity", "scenarios": ["flat-disk-anisotropic"], "resolutions": [17, 33],
                   "tolerances": {"rigidity_threshold": 1e-3}}"#;
    let cfg = write(dir.path(), "c.json", text);
    let out = run(&["run", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL flat-disk-anisotropic"));
}

#[test]
fn csvs_are_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "abp.json", ABP_SMALL);
    let outs: Vec<_> = [("a", "1"), ("b", "1"), ("c", "3")]
        .iter()
        .map(|(name, workers)| {
            let o = dir.path().join(name);
            let out = run(&["run", &cfg, "--out", o.to_str().unwrap(), "--workers", workers]);
            assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
            o
        })
        .collect();
    for f in ["sobolev.csv", "abp_sweep.csv", "coverage.csv"] {
        let first = std::fs::read(outs[0].join(f)).unwrap();
        assert!(first.len() > 100, "{f}");
        for o in &outs[1..] {
            assert_eq!(first, std::fs::read(o.join(f)).unwrap(), "{f}");
        }
    }
    // a different seed changes the samples
    let o = dir.path().join("d");
    run(&["run", &cfg, "--out", o.to_str().unwrap(), "--seed", "12"]);
    assert_ne!(
        std::fs::read(outs[0].join("coverage.csv")).unwrap(),
        std::fs::read(o.join("coverage.csv")).unwrap()
    );
}

#[test]
fn convergence_subcommand_reports_slope() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");
    let out = run(&["convergence", "sphere-conformal", "--resolutions", "17,33,65", "--out", o.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(o.join("report.json")).unwrap()).unwrap();
    let slopes = report["scenarios"][0]["convergence"]["slopes"].as_array().unwrap();
    let slope = slopes.last().unwrap().as_f64().unwrap();
    assert!((slope - 2.0).abs() < 0.1, "{slope}");
}
