use std::fmt::Write as _;
use std::path::Path;

use super::pipeline::RunOutput;
use crate::error::Result;

pub const SOBOLEV_HEADER: &str =
    "scenario,n,m,resolution,lhs_interior,lhs_boundary,rhs_integral,constant,ratio,eps_mesh";
pub const SWEEP_HEADER: &str = "scenario,resolution,sample,node,y,det,bound,psd_floor,violation";
pub const COVERAGE_HEADER: &str =
    "scenario,resolution,sample,xi,x0,y0,residual,interior,in_v,min_eigenvalue,boundary_check,covered";

/// Shortest round-trip decimal; stable across runs and platforms.
fn num(v: f64) -> String {
    format!("{v:e}")
}

fn vec_field(v: impl IntoIterator<Item = f64>) -> String {
    v.into_iter().map(num).collect::<Vec<_>>().join(" ")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

struct Csv {
    text: String,
    trailer: String,
}

impl Csv {
    fn new(header: &str, seed: u64, sha: &str) -> Self {
        Csv {
            text: format!("{header},seed,config_sha256\n"),
            trailer: format!("{seed},{sha}"),
        }
    }

    fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.text, "{},{}", fields.join(","), self.trailer);
    }
}

pub fn sobolev_csv(out: &RunOutput) -> String {
    let r = &out.report;
    let mut csv = Csv::new(SOBOLEV_HEADER, r.seed, &r.config_sha256);
    for s in r.scenarios.iter().flat_map(|s| &s.sobolev) {
        csv.row(&[
            s.scenario.clone(),
            s.n.to_string(),
            s.m.to_string(),
            s.resolution.to_string(),
            num(s.lhs_interior),
            num(s.lhs_boundary),
            num(s.rhs_integral),
            num(s.constant),
            num(s.ratio),
            opt(s.eps_mesh),
        ]);
    }
    csv.text
}

pub fn sweep_csv(out: &RunOutput) -> String {
    let r = &out.report;
    let mut csv = Csv::new(SWEEP_HEADER, r.seed, &r.config_sha256);
    for s in &out.sweep {
        csv.row(&[
            s.scenario.clone(),
            s.resolution.to_string(),
            s.sample.to_string(),
            s.node.to_string(),
            vec_field(s.y.iter().copied()),
            num(s.det),
            num(s.bound),
            num(s.psd_floor),
            s.violation.to_string(),
        ]);
    }
    csv.text
}

pub fn coverage_csv(out: &RunOutput) -> String {
    let r = &out.report;
    let mut csv = Csv::new(COVERAGE_HEADER, r.seed, &r.config_sha256);
    for row in &out.coverage {
        let c = &row.inner;
        csv.row(&[
            row.scenario.clone(),
            row.resolution.to_string(),
            row.sample.to_string(),
            vec_field(c.xi.iter().copied()),
            vec_field(c.x0.iter().copied()),
            vec_field(c.y0.iter().copied()),
            num(c.residual),
            c.interior.to_string(),
            c.in_v.to_string(),
            num(c.min_eigenvalue),
            opt(c.boundary_check),
            row.covered.to_string(),
        ]);
    }
    csv.text
}

/// Writes `report.json` and the three CSV files into `dir`.
pub fn write_all(out: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(&out.report).map_err(std::io::Error::other)?;
    std::fs::write(dir.join("report.json"), json + "\n")?;
    std::fs::write(dir.join("sobolev.csv"), sobolev_csv(out))?;
    std::fs::write(dir.join("abp_sweep.csv"), sweep_csv(out))?;
    std::fs::write(dir.join("coverage.csv"), coverage_csv(out))?;
    Ok(())
}
