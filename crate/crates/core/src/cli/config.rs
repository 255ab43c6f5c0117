use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scenarios;
use crate::sobolev::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Inequality,
    AbpFull,
    Rigidity,
    Convergence,
}

/// A scenario by builtin name, by file, or inline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Builtin(String),
    File { file: PathBuf },
    Inline(Box<Scenario>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSweep {
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Samples {
    pub coverage: usize,
    pub jacobian: usize,
    pub fd_jacobian: usize,
}

impl Default for Samples {
    fn default() -> Self {
        Samples {
            coverage: 1000,
            jacobian: 10_000,
            fd_jacobian: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub solver: f64,
    /// Fixed PSD slack for `V`; default is `10 h² (1 + |D²u|)` per point.
    pub eps_psd: Option<f64>,
    /// The inequality passes when `ratio ≥ 1 − ratio_factor · ε_mesh`.
    pub ratio_factor: f64,
    pub min_coverage: f64,
    /// Jacobian sweep tolerance as a multiple of the Hessian mesh error.
    pub jacobian_factor: f64,
    pub min_slope: f64,
    /// Annulus radius for the volume-bound chain.
    pub sigma: f64,
    /// When set, the rigidity pipeline requires every diagnostic below it.
    pub rigidity_threshold: Option<f64>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            solver: 1e-10,
            eps_psd: None,
            ratio_factor: 5.0,
            min_coverage: 0.99,
            jacobian_factor: 10.0,
            min_slope: 1.9,
            sigma: 0.5,
            rigidity_threshold: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scenarios: Vec<ScenarioRef>,
    #[serde(default)]
    pub random_sweep: Option<RandomSweep>,
    pub pipeline: Pipeline,
    /// Overrides each scenario's own resolution list when present.
    #[serde(default)]
    pub resolutions: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub samples: Samples,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// A parsed config with its provenance.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub sha256: String,
    /// Where the config came from, for error messages.
    pub source: String,
    pub base_dir: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn config_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Reads and parses a config; errors carry the JSON path and line.
pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let bytes = std::fs::read(path).map_err(|e| config_error(path, format!("cannot read: {e}")))?;
    let config = parse_config(&bytes).map_err(|m| config_error(path, m))?;
    Ok(LoadedConfig {
        config,
        sha256: sha256_hex(&bytes),
        source: path.display().to_string(),
        base_dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    })
}

pub fn parse_config(bytes: &[u8]) -> std::result::Result<RunConfig, String> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        format!("at `{}`: {inner}", e.path())
    })
}

impl LoadedConfig {
    /// Resolves references and validates every scenario before any solve.
    pub fn scenarios(&self) -> Result<Vec<Scenario>> {
        let cfg = &self.config;
        let mut out = Vec::new();
        for r in &cfg.scenarios {
            let s = match r {
                ScenarioRef::Builtin(name) => scenarios::builtin(name).ok_or_else(|| {
                    config_error(Path::new(&self.source), format!("unknown builtin scenario `{name}`"))
                })?,
                ScenarioRef::File { file } => load_scenario(&self.base_dir.join(file))?,
                ScenarioRef::Inline(s) => (**s).clone(),
            };
            out.push(s);
        }
        if let Some(sweep) = &cfg.random_sweep {
            out.extend(scenarios::random_sweep(sweep.seed, sweep.count));
        }
        if out.is_empty() {
            return Err(config_error(Path::new(&self.source), "no scenarios"));
        }
        if let Some(res) = &cfg.resolutions {
            for s in &mut out {
                s.resolutions = res.clone();
            }
        }
        for s in &out {
            validate_for(s, cfg.pipeline)?;
        }
        Ok(out)
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let bytes = std::fs::read(path).map_err(|e| config_error(path, format!("cannot read: {e}")))?;
    let de = &mut serde_json::Deserializer::from_slice(&bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let inner = e.inner();
        config_error(path, format!("at `{}`: {inner}", e.path()))
    })
}

/// Checks that need no discretization.
pub fn validate_for(s: &Scenario, pipeline: Pipeline) -> Result<()> {
    s.validate()?;
    let res = &s.resolutions;
    if res.is_empty() || res.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidScenario(format!(
            "{}: resolutions must be non-empty and strictly increasing, got {res:?}",
            s.name
        )));
    }
    for c in &s.components {
        // rejects bad boxes, maps and fourth-order resolutions up front
        for &r in res {
            c.chart.build(r)?;
        }
    }
    match pipeline {
        Pipeline::AbpFull | Pipeline::Rigidity if s.components.len() != 1 => Err(Error::InvalidScenario(format!(
            "{}: the ABP pipelines need a connected surface, got {} components",
            s.name,
            s.components.len()
        ))),
        Pipeline::AbpFull if s.coarse_resolution(*res.last().expect("non-empty")).is_none() => {
            Err(Error::InvalidScenario(format!(
                "{}: the finest resolution must be odd so that (N+1)/2 gives the mesh-error grid",
                s.name
            )))
        }
        Pipeline::Rigidity if s.effective_codim() != 2 => Err(Error::InvalidScenario(format!(
            "{}: rigidity diagnostics need codimension 2, got {}",
            s.name,
            s.effective_codim()
        ))),
        Pipeline::Convergence if res.len() < 3 => Err(Error::InvalidScenario(format!(
            "{}: convergence needs at least 3 resolutions",
            s.name
        ))),
        _ => Ok(()),
    }
}
