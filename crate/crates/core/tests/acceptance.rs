//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sobolev_abp::abp::{self, rigidity_diagnostics, AbpProblem, SolverOptions};
use sobolev_abp::cli::config::{sha256_hex, LoadedConfig, Pipeline, RunConfig, Samples, ScenarioRef, Tolerances};
use sobolev_abp::cli::pipeline::{self, RunOutput, RIGIDITY_NOISE_FLOOR};
use sobolev_abp::cli::execute;
use sobolev_abp::geometry::{BaseDomain, ChartSpec, DerivativeMode};
use sobolev_abp::linalg::{matrix_amgm_check, SymMatrix};
use sobolev_abp::scenarios::{builtin, catalog, random_sweep};
use sobolev_abp::sobolev::{
    convergence_study, evaluate_at, evaluate_inequality, michael_simon_constant, report_for, Scenario, Selector,
};
use sobolev_abp::tensorfield::TensorSpec;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn config(pipeline: Pipeline, scenarios: &[&str], resolutions: Vec<usize>, tolerances: Tolerances) -> LoadedConfig {
    let cfg = RunConfig {
        scenarios: scenarios.iter().map(|s| ScenarioRef::Builtin(s.to_string())).collect(),
        random_sweep: None,
        pipeline,
        resolutions: Some(resolutions),
        seed: 1,
        output_dir: None,
        samples: Samples::default(),
        tolerances,
    };
    let sha = sha256_hex(&serde_json::to_vec(&cfg).unwrap());
    LoadedConfig {
        config: cfg,
        sha256: sha,
        source: "acceptance".into(),
        base_dir: PathBuf::new(),
    }
}

fn run_pipeline(loaded: &LoadedConfig) -> RunOutput {
    let scenarios = loaded.scenarios().expect("valid config");
    pipeline::run(loaded, &scenarios, loaded.config.seed)
}

fn flat_disk() -> Outcome {
    let t = Instant::now();
    let exact = builtin("flat-disk-equality").unwrap();
    let r65 = evaluate_at(&exact, 65).unwrap();
    let r129 = evaluate_at(&exact, 129).unwrap();
    let exact_study = convergence_study(&exact, &[33, 65, 129]).unwrap();
    // finite-difference derivatives give a non-trivial refinement sequence
    let fd = Scenario::single(
        "flat-disk-fd2",
        Selector::Codim2,
        ChartSpec::new(BaseDomain::PolarDisk, 4).with_mode(DerivativeMode::Fd2),
        TensorSpec::Metric,
    );
    let fd_study = convergence_study(&fd, &[33, 65, 129]).unwrap();
    let fd_slope = fd_study.slope().unwrap();
    let elapsed = t.elapsed();
    let dev = |r: f64| (r - 1.0).abs();
    let passed = dev(r65.ratio) <= 1e-2
        && dev(r129.ratio) <= 2.5e-3
        && dev(fd_study.ratios[1]) <= 1e-2
        && dev(fd_study.ratios[2]) <= 2.5e-3
        && exact_study.passes(1.9)
        && fd_slope >= 1.9
        && elapsed < Duration::from_secs(10);
    outcome(
        passed,
        format!(
            "|ratio-1| = {:.1e} @65, {:.1e} @129 (exact derivatives: {}); fd2 {:.1e} @65, {:.1e} @129, slope {fd_slope:.3}; {:.2?}",
            dev(r65.ratio),
            dev(r129.ratio),
            if exact_study.exact { "no discretization error" } else { "inexact" },
            dev(fd_study.ratios[1]),
            dev(fd_study.ratios[2]),
            elapsed
        ),
    )
}

fn sphere_lift() -> Outcome {
    let r = evaluate_at(&builtin("sphere-codim1-lift").unwrap(), 129).unwrap();
    outcome(
        (r.ratio - 2.0).abs() <= 1e-2 && r.m == 2,
        format!("ratio {:.6} @129, m = {}", r.ratio, r.m),
    )
}

fn constant_identity() -> Outcome {
    use std::f64::consts::PI;
    // |B^n| for n = 2..6 in closed form
    let balls = [PI, 4.0 * PI / 3.0, PI * PI / 2.0, 8.0 * PI * PI / 15.0, PI.powi(3) / 6.0];
    let t = Instant::now();
    let worst = (2..=6)
        .map(|n| {
            let want = n as f64 * balls[n - 2].powf(1.0 / n as f64);
            (michael_simon_constant(n, 2).unwrap() - want).abs()
        })
        .fold(0.0, f64::max);
    let elapsed = t.elapsed();
    outcome(
        worst <= 1e-12 && elapsed < Duration::from_millis(1),
        format!("max deviation {worst:.1e} over n = 2..6; {elapsed:.2?}"),
    )
}

fn amgm() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_gap = f64::INFINITY;
    let mut failures = 0;
    for i in 0..1000 {
        let n = 2 + i % 4;
        let b1 = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let b2 = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = SymMatrix::new(&b1 * b1.transpose() + DMatrix::identity(n, n) * 0.05);
        let b = SymMatrix::new(&b2 * b2.transpose());
        match matrix_amgm_check(&a, &b, 1e-9) {
            Ok(r) if r.holds && r.gap >= -1e-9 => worst_gap = worst_gap.min(r.gap),
            _ => failures += 1,
        }
    }
    let mut flagged = 0;
    for i in 0..100 {
        let n = 2 + i % 4;
        let lambda = rng.random_range(0.1..10.0);
        let b1 = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = SymMatrix::new(&b1 * b1.transpose() + DMatrix::identity(n, n) * 0.5);
        let inv = a.as_matrix().clone().try_inverse().unwrap();
        let b = SymMatrix::new((&inv + inv.transpose()) * (0.5 * lambda));
        if matrix_amgm_check(&a, &b, 1e-8).is_ok_and(|r| r.equality_flag) {
            flagged += 1;
        }
    }
    outcome(
        failures == 0 && flagged == 100,
        format!("1000 pairs: {failures} negative gaps (min gap {worst_gap:.1e}); {flagged}/100 scalar products flagged"),
    )
}

fn random_sweep_criterion() -> Outcome {
    let t = Instant::now();
    let scenarios = random_sweep(17, 60);
    let mut ok = 0;
    let mut worst = f64::INFINITY;
    let mut errors = Vec::new();
    for s in &scenarios {
        match evaluate_inequality(s, 65) {
            Ok(r) => {
                let eps = r.eps_mesh.unwrap_or(0.0);
                worst = worst.min(r.ratio);
                if r.ratio >= 1.0 - 5.0 * eps {
                    ok += 1;
                }
            }
            Err(e) => errors.push(format!("{}: {e}", s.name)),
        }
    }
    let elapsed = t.elapsed();
    outcome(
        ok >= 50 && ok == scenarios.len() && elapsed < Duration::from_secs(300),
        format!(
            "{ok}/{} random codim-2 scenarios with ratio >= 1 - 5 eps (min ratio {worst:.4}); {} errors; {elapsed:.2?}",
            scenarios.len(),
            errors.len()
        ),
    )
}

fn abp_pipeline() -> Outcome {
    let t = Instant::now();
    let loaded = config(
        Pipeline::AbpFull,
        &["flat-disk-equality", "sphere-codim1-lift"],
        vec![65],
        Tolerances::default(),
    );
    let out = run_pipeline(&loaded);
    let elapsed = t.elapsed();
    let mut parts = Vec::new();
    let mut passed = out.report.passed && elapsed < Duration::from_secs(120);
    for s in &out.report.scenarios {
        let Some(a) = &s.abp else {
            passed = false;
            parts.push(format!("{}: {}", s.name, s.error.clone().unwrap_or_default()));
            continue;
        };
        passed &= a.coverage.targets == 1000 && a.jacobian.samples == 10_000 && a.jacobian.fd_compared == 100;
        parts.push(format!(
            "{}: coverage {:.3}, violations {}/{}, fd diff {:.1e} (<= {:.2}), slack {:.1e} (>= -{:.1e})",
            s.name,
            a.coverage.fraction,
            a.jacobian.violations,
            a.jacobian.samples,
            a.jacobian.fd_max_difference,
            a.jacobian.fd_tolerance,
            a.volume.slack,
            a.eps_mesh
        ));
    }
    outcome(passed, format!("{}; {elapsed:.2?}", parts.join("; ")))
}

fn rigidity() -> Outcome {
    let loaded = config(
        Pipeline::Rigidity,
        &["flat-disk-equality"],
        vec![33, 65, 129],
        Tolerances {
            rigidity_threshold: Some(5e-3),
            ..Tolerances::default()
        },
    );
    let out = run_pipeline(&loaded);
    let disk = &out.report.scenarios[0];
    let finest = disk.rigidity.last().unwrap();
    let values: Vec<String> = finest
        .diagnostics
        .values()
        .iter()
        .map(|(name, v)| format!("{name} {v:.1e}"))
        .collect();
    let sphere = builtin("sphere-codim1-lift").unwrap();
    let problem = AbpProblem::from_scenario(&sphere, 129).unwrap();
    let sol = abp::solve(&problem, &SolverOptions::default()).unwrap();
    let sup_ii = rigidity_diagnostics(&problem, &sol).sup_ii;
    outcome(
        disk.passed && (sup_ii - 2.0).abs() <= 1e-2,
        format!(
            "disk @129: {} (non-increasing over 33/65/129 above {RIGIDITY_NOISE_FLOOR:.0e}: {}); sphere sup_II {sup_ii:.6}",
            values.join(", "),
            disk.checks.iter().filter(|c| c.name.ends_with("_nonincreasing")).all(|c| c.passed)
        ),
    )
}

fn two_disks() -> Outcome {
    let r = evaluate_at(&builtin("disconnected-two-disks").unwrap(), 65).unwrap();
    outcome(
        (r.ratio - 2f64.sqrt()).abs() <= 1e-2,
        format!("ratio {:.6} vs sqrt(2) = {:.6}", r.ratio, 2f64.sqrt()),
    )
}

fn scaling() -> Outcome {
    let mut worst = 0.0_f64;
    let mut count = 0;
    for s in catalog() {
        let res = if s.intrinsic_dim() == 3 { 17 } else { 33 };
        let parts = s.discretize(res).unwrap();
        let base = report_for(&s, res, &parts).unwrap();
        for lambda in [0.5, 2.0, 10.0] {
            let scaled: Vec<_> = parts.iter().map(|(sf, a)| (sf.clone(), a.scaled(lambda))).collect();
            let r = report_for(&s, res, &scaled).unwrap();
            worst = worst.max((r.ratio - base.ratio).abs() / base.ratio);
            count += 1;
        }
    }
    outcome(
        worst <= 1e-10,
        format!("{count} builtin/lambda pairs, max relative ratio change {worst:.1e}"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut loaded = config(
        Pipeline::AbpFull,
        &["flat-disk-equality", "sphere-conformal"],
        vec![33],
        Tolerances::default(),
    );
    loaded.config.samples = Samples {
        coverage: 300,
        jacobian: 3000,
        fd_jacobian: 30,
    };
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let o = dir.path().join(name);
            (execute(&loaded, Some(42), &o).unwrap(), o)
        })
        .collect();
    let mut same = runs.iter().all(|(r, _)| r.report.passed);
    let mut bytes = 0;
    for f in ["sobolev.csv", "abp_sweep.csv", "coverage.csv"] {
        let a = std::fs::read(runs[0].1.join(f)).unwrap();
        let b = std::fs::read(runs[1].1.join(f)).unwrap();
        bytes += a.len();
        same &= a == b && !a.is_empty();
    }
    outcome(same, format!("3 CSVs, {bytes} bytes, identical across two runs with seed 42"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("flat disk equality ratio and convergence", flat_disk),
        ("lifted sphere ratio", sphere_lift),
        ("codim-2 constant identity", constant_identity),
        ("matrix AM-GM", amgm),
        ("random codim-2 sweep", random_sweep_criterion),
        ("ABP coverage, Jacobian, volume", abp_pipeline),
        ("disk rigidity, sphere curvature", rigidity),
        ("two disks superadditivity", two_disks),
        ("scaling invariance", scaling),
        ("deterministic CSVs", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        if !o.passed {
            failed += 1;
        }
        println!(
            "{} [{}] {name}: {} ({:.2?})",
            if o.passed { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            t.elapsed()
        );
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
