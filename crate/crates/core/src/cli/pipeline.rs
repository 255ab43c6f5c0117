use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{LoadedConfig, Pipeline, RunConfig};
use crate::abp::{
    self, coverage_sweep, fd_jacobian_determinant, hessian_mesh_error, jacobian_bound_check, jacobian_determinant,
    rigidity_diagnostics, sample_v_points, transport_map, volume_bound_check, AbpProblem, CoverageSample,
    RigidityDiagnostics, SolveStats, SolverOptions, VolumeBound, COMPATIBILITY_TOLERANCE,
};
use crate::error::Result;
use crate::sobolev::{convergence_study, evaluate_inequality, ConvergenceStudy, Scenario, SobolevReport};

/// Below this a rigidity diagnostic counts as converged for the
/// monotonicity check (solver precision).
pub const RIGIDITY_NOISE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub resolution: usize,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: &str, resolution: usize, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            resolution,
            value,
            threshold,
            passed: value <= threshold,
        }
    }

    fn at_least(name: &str, resolution: usize, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            resolution,
            value,
            threshold,
            passed: value >= threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub targets: usize,
    pub covered: usize,
    pub fraction: f64,
    pub residual_tolerance: f64,
    pub boundary_sign_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianSummary {
    pub samples: usize,
    pub violations: usize,
    pub max_excess: f64,
    pub tolerance: f64,
    pub fd_compared: usize,
    pub fd_max_difference: f64,
    pub fd_tolerance: f64,
    pub orthogonality_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbpReport {
    pub resolution: usize,
    pub seed: u64,
    pub mesh_size: f64,
    pub eps_mesh: f64,
    pub stats: SolveStats,
    pub coverage: CoverageSummary,
    pub jacobian: JacobianSummary,
    pub volume: VolumeBound,
    pub rigidity: RigidityDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidityAt {
    pub resolution: usize,
    pub diagnostics: RigidityDiagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub description: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub sobolev: Vec<SobolevReport>,
    pub abp: Option<AbpReport>,
    pub rigidity: Vec<RigidityAt>,
    pub convergence: Option<ConvergenceStudy>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub scenario: String,
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub config_sha256: String,
    pub seed: u64,
    pub pipeline: Pipeline,
    pub passed: bool,
    pub scenarios: Vec<ScenarioReport>,
    pub timings: Vec<StageTiming>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub scenario: String,
    pub resolution: usize,
    pub sample: usize,
    pub node: usize,
    pub y: Vec<f64>,
    pub det: f64,
    pub bound: f64,
    pub psd_floor: f64,
    pub violation: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoverageRow {
    pub scenario: String,
    pub resolution: usize,
    pub sample: usize,
    pub inner: CoverageSample,
    pub covered: bool,
}

/// Everything one run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub sweep: Vec<SweepRow>,
    pub coverage: Vec<CoverageRow>,
}

struct Stages<'a> {
    scenario: &'a str,
    timings: Vec<StageTiming>,
}

impl Stages<'_> {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.push(StageTiming {
            scenario: self.scenario.to_string(),
            stage: stage.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }
}

/// Runs the configured pipeline on every scenario, in order.
pub fn run(loaded: &LoadedConfig, scenarios: &[Scenario], seed: u64) -> RunOutput {
    let cfg = &loaded.config;
    let mut out = RunOutput {
        report: RunReport {
            config: cfg.clone(),
            config_sha256: loaded.sha256.clone(),
            seed,
            pipeline: cfg.pipeline,
            passed: true,
            scenarios: Vec::new(),
            timings: Vec::new(),
        },
        sweep: Vec::new(),
        coverage: Vec::new(),
    };
    for (index, s) in scenarios.iter().enumerate() {
        let mut stages = Stages {
            scenario: &s.name,
            timings: Vec::new(),
        };
        let mut rep = ScenarioReport {
            name: s.name.clone(),
            description: s.description.clone(),
            passed: false,
            checks: Vec::new(),
            sobolev: Vec::new(),
            abp: None,
            rigidity: Vec::new(),
            convergence: None,
            error: None,
        };
        let result = match cfg.pipeline {
            Pipeline::Inequality => inequality(cfg, s, &mut rep, &mut stages),
            Pipeline::AbpFull => abp_full(cfg, s, seed, index as u64, &mut rep, &mut out, &mut stages),
            Pipeline::Rigidity => rigidity(cfg, s, &mut rep, &mut stages),
            Pipeline::Convergence => convergence(cfg, s, &mut rep, &mut stages),
        };
        if let Err(e) = result {
            rep.error = Some(e.to_string());
        }
        rep.passed = rep.error.is_none() && rep.checks.iter().all(|c| c.passed);
        out.report.passed &= rep.passed;
        out.report.scenarios.push(rep);
        out.report.timings.extend(stages.timings);
    }
    out
}

fn inequality(cfg: &RunConfig, s: &Scenario, rep: &mut ScenarioReport, stages: &mut Stages) -> Result<()> {
    for &res in &s.resolutions {
        let r = stages.time(&format!("inequality@{res}"), || evaluate_inequality(s, res))?;
        let eps = r.eps_mesh.unwrap_or(0.0);
        rep.checks.push(Check::at_least(
            "ratio_lower_bound",
            res,
            r.ratio,
            1.0 - cfg.tolerances.ratio_factor * eps,
        ));
        rep.sobolev.push(r);
    }
    Ok(())
}

fn solver_options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions {
        tolerance: cfg.tolerances.solver,
        ..SolverOptions::default()
    }
}

fn abp_full(
    cfg: &RunConfig,
    s: &Scenario,
    seed: u64,
    index: u64,
    rep: &mut ScenarioReport,
    out: &mut RunOutput,
    stages: &mut Stages,
) -> Result<()> {
    let tol = &cfg.tolerances;
    let res = *s.resolutions.last().expect("validated");
    let coarse = s.coarse_resolution(res).expect("validated");
    let r = stages.time("inequality", || evaluate_inequality(s, res))?;
    rep.sobolev.push(r);

    let opts = solver_options(cfg);
    let problem = AbpProblem::from_scenario(s, res)?;
    rep.checks.push(Check::at_most(
        "compatibility_residual",
        res,
        problem.compatibility_residual(),
        COMPATIBILITY_TOLERANCE,
    ));
    let sol = stages.time("solve", || abp::solve(&problem, &opts))?;
    let problem_c = AbpProblem::from_scenario(s, coarse)?;
    let sol_c = stages.time("solve_coarse", || abp::solve(&problem_c, &opts))?;
    let eps = hessian_mesh_error((&problem, &sol), (&problem_c, &sol_c))?;
    let h = problem.surface.mesh_size();

    let cov = stages.time("coverage", || {
        coverage_sweep(&problem, &sol, cfg.samples.coverage, seed, 2 * index, tol.eps_psd)
    });
    rep.checks
        .push(Check::at_least("coverage_fraction", res, cov.fraction, tol.min_coverage));
    rep.checks.push(Check::at_least(
        "boundary_sign_check",
        res,
        if cov.boundary_sign_ok { 1.0 } else { 0.0 },
        1.0,
    ));
    for (i, c) in cov.samples.iter().enumerate() {
        out.coverage.push(CoverageRow {
            scenario: s.name.clone(),
            resolution: res,
            sample: i,
            covered: c.covered(cov.tolerance),
            inner: c.clone(),
        });
    }

    let points = stages.time("v_sampling", || {
        sample_v_points(&problem.surface, &sol, cfg.samples.jacobian, seed, 2 * index + 1, tol.eps_psd)
    });
    rep.checks.push(Check::at_least(
        "v_samples",
        res,
        points.len() as f64,
        cfg.samples.jacobian as f64,
    ));
    let jb = stages.time("jacobian_bound", || {
        jacobian_bound_check(&problem, &sol, &points, tol.jacobian_factor * eps)
    });
    rep.checks
        .push(Check::at_most("jacobian_violations", res, jb.violations as f64, 0.0));
    for (i, r) in jb.records.iter().enumerate() {
        let excess = (r.det - r.bound).max(-r.det - r.psd_floor);
        out.sweep.push(SweepRow {
            scenario: s.name.clone(),
            resolution: res,
            sample: i,
            node: r.node,
            y: r.y.clone(),
            det: r.det,
            bound: r.bound,
            psd_floor: r.psd_floor,
            violation: excess > jb.tolerance,
        });
    }

    let (fd_compared, fd_max) = stages.time("fd_jacobian", || {
        let mut compared = 0;
        let mut worst = 0.0_f64;
        for p in &points {
            if compared == cfg.samples.fd_jacobian {
                break;
            }
            if let Some(fd) = fd_jacobian_determinant(&problem.surface, &sol, p) {
                worst = worst.max((fd - jacobian_determinant(&problem.surface, &sol, p)).abs());
                compared += 1;
            }
        }
        (compared, worst)
    });
    rep.checks
        .push(Check::at_most("fd_jacobian_difference", res, fd_max, 10.0 * h));
    let orthogonality = points
        .iter()
        .map(|p| {
            let phi = transport_map(&problem.surface, &sol, p);
            let y2: f64 = p.y.iter().map(|v| v * v).sum();
            (phi.norm_squared() - sol.grad[p.node].norm_squared() - y2).abs()
        })
        .fold(0.0, f64::max);
    rep.checks
        .push(Check::at_most("orthogonality", res, orthogonality, 1e-10));

    let volume = volume_bound_check(&problem, &sol, tol.sigma, eps);
    rep.checks
        .push(Check::at_least("volume_bound_slack", res, volume.slack, -eps));
    rep.checks.push(Check::at_least(
        "annulus_chain",
        res,
        if volume.annulus_holds { 1.0 } else { 0.0 },
        1.0,
    ));
    let rigidity = stages.time("rigidity", || rigidity_diagnostics(&problem, &sol));

    rep.abp = Some(AbpReport {
        resolution: res,
        seed,
        mesh_size: h,
        eps_mesh: eps,
        stats: sol.stats.clone(),
        coverage: CoverageSummary {
            targets: cov.samples.len(),
            covered: cov.covered,
            fraction: cov.fraction,
            residual_tolerance: cov.tolerance,
            boundary_sign_ok: cov.boundary_sign_ok,
        },
        jacobian: JacobianSummary {
            samples: jb.samples,
            violations: jb.violations,
            max_excess: jb.max_excess,
            tolerance: jb.tolerance,
            fd_compared,
            fd_max_difference: fd_max,
            fd_tolerance: 10.0 * h,
            orthogonality_max: orthogonality,
        },
        volume,
        rigidity,
    });
    Ok(())
}

fn rigidity(cfg: &RunConfig, s: &Scenario, rep: &mut ScenarioReport, stages: &mut Stages) -> Result<()> {
    let opts = solver_options(cfg);
    for &res in &s.resolutions {
        let problem = AbpProblem::from_scenario(s, res)?;
        let sol = stages.time(&format!("solve@{res}"), || abp::solve(&problem, &opts))?;
        let diagnostics = stages.time(&format!("rigidity@{res}"), || rigidity_diagnostics(&problem, &sol));
        rep.rigidity.push(RigidityAt {
            resolution: res,
            diagnostics,
        });
    }
    if let Some(threshold) = cfg.tolerances.rigidity_threshold {
        let finest = rep.rigidity.last().expect("non-empty");
        for (name, v) in finest.diagnostics.values() {
            rep.checks.push(Check::at_most(name, finest.resolution, v, threshold));
        }
        for w in rep.rigidity.windows(2) {
            for ((name, prev), (_, next)) in w[0].diagnostics.values().iter().zip(w[1].diagnostics.values()) {
                rep.checks.push(Check::at_most(
                    &format!("{name}_nonincreasing"),
                    w[1].resolution,
                    next,
                    prev.max(RIGIDITY_NOISE_FLOOR),
                ));
            }
        }
    }
    Ok(())
}

fn convergence(cfg: &RunConfig, s: &Scenario, rep: &mut ScenarioReport, stages: &mut Stages) -> Result<()> {
    let study = stages.time("convergence", || convergence_study(s, &s.resolutions))?;
    let finest = *s.resolutions.last().expect("validated");
    // an exact discretization passes: there is no error left to decay
    let slope = if study.exact {
        f64::INFINITY
    } else {
        study.slope().unwrap_or(f64::NAN)
    };
    rep.checks
        .push(Check::at_least("convergence_slope", finest, slope, cfg.tolerances.min_slope));
    rep.sobolev = study.reports.clone();
    rep.convergence = Some(study);
    Ok(())
}
