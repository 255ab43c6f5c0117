//! Command-line front end: config loading, pipelines and output files.

pub mod config;
pub mod output;
pub mod pipeline;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use config::{LoadedConfig, Pipeline, RunConfig, ScenarioRef};
use pipeline::RunOutput;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

const DEFAULT_OUT: &str = "results";

#[derive(Debug, Parser)]
#[command(name = "sobolev-abp", version, about = "Sobolev inequality and ABP transport checks on immersed surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the pipeline described by a JSON config.
    Run {
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the builtin scenarios.
    ListScenarios,
    /// Refinement study of the inequality ratio for one scenario.
    Convergence {
        /// Builtin name or path to a scenario JSON file.
        scenario: String,
        #[arg(long, value_delimiter = ',', required = true)]
        resolutions: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    match cli.command {
        Command::ListScenarios => {
            for s in crate::scenarios::catalog() {
                println!("{:<24} n={} m={}  {}", s.name, s.intrinsic_dim(), s.effective_codim(), s.description);
            }
            EXIT_PASS
        }
        Command::Run {
            config,
            seed,
            out,
            workers,
        } => with_workers(workers, || {
            let loaded = config::load_config(&config)?;
            let out = out
                .or_else(|| loaded.config.output_dir.as_ref().map(|d| loaded.base_dir.join(d)))
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            report(&execute(&loaded, seed, &out)?, &out)
        }),
        Command::Convergence {
            scenario,
            resolutions,
            out,
            workers,
        } => with_workers(workers, || {
            let loaded = convergence_config(&scenario, resolutions)?;
            let out = out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            report(&execute(&loaded, None, &out)?, &out)
        }),
    }
}

fn with_workers(workers: Option<usize>, f: impl FnOnce() -> Result<i32> + Send) -> i32 {
    let run = || match f() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. }
                | Error::InvalidScenario(_)
                | Error::InvalidChart(_)
                | Error::UnsupportedDimension(_) => EXIT_CONFIG,
                _ => EXIT_CHECK_FAILED,
            }
        }
    };
    match workers {
        None => run(),
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                eprintln!("error: cannot start {k} workers: {e}");
                EXIT_CONFIG
            }
        },
    }
}

/// A single-scenario convergence config; its hash is taken over the
/// canonical JSON.
fn convergence_config(scenario: &str, resolutions: Vec<usize>) -> Result<LoadedConfig> {
    let reference = if crate::scenarios::builtin(scenario).is_some() {
        ScenarioRef::Builtin(scenario.to_string())
    } else if Path::new(scenario).is_file() {
        ScenarioRef::Inline(Box::new(config::load_scenario(Path::new(scenario))?))
    } else {
        return Err(Error::Config {
            path: scenario.to_string(),
            message: "neither a builtin scenario nor a readable file".into(),
        });
    };
    let cfg = RunConfig {
        scenarios: vec![reference],
        random_sweep: None,
        pipeline: Pipeline::Convergence,
        resolutions: Some(resolutions),
        seed: 0,
        output_dir: None,
        samples: Default::default(),
        tolerances: Default::default(),
    };
    let bytes = serde_json::to_vec(&cfg).map_err(std::io::Error::other)?;
    Ok(LoadedConfig {
        config: cfg,
        sha256: config::sha256_hex(&bytes),
        source: scenario.to_string(),
        base_dir: PathBuf::new(),
    })
}

/// Validates, runs and writes outputs into `out`.
pub fn execute(loaded: &LoadedConfig, seed: Option<u64>, out: &Path) -> Result<RunOutput> {
    let scenarios = loaded.scenarios()?;
    let seed = seed.unwrap_or(loaded.config.seed);
    let result = pipeline::run(loaded, &scenarios, seed);
    output::write_all(&result, out)?;
    Ok(result)
}

/// Prints a per-scenario summary and returns the exit code.
fn report(result: &RunOutput, out: &Path) -> Result<i32> {
    for s in &result.report.scenarios {
        println!("{} {}", if s.passed { "PASS" } else { "FAIL" }, s.name);
        for c in s.checks.iter().filter(|c| !c.passed) {
            println!("    {} @ {}: {:e} vs {:e}", c.name, c.resolution, c.value, c.threshold);
        }
        if let Some(e) = &s.error {
            println!("    error: {e}");
        }
    }
    let passed = result.report.scenarios.iter().filter(|s| s.passed).count();
    println!(
        "{passed}/{} scenarios passed; outputs in {}",
        result.report.scenarios.len(),
        out.display()
    );
    Ok(if result.report.passed {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    })
}
