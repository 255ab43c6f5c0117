//! Ball coverage by `Φ(V)`: for a target `ξ`, minimize
//! `ω(x) = u(x) − ⟨x, ξ⟩` and check that the minimizer lands in `V`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fields::AbpSolution;
use super::problem::AbpProblem;
use super::transport::uniform_in_ball;
use crate::geometry::{AxisEnd, PointGeometry};
use crate::linalg::{min_eigenvalue, whiten, SymMatrix};
use crate::tensorfield::flux_vector;

const MAX_NEWTON: usize = 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageSample {
    pub xi: Vec<f64>,
    /// Grid minimizer of `ω`.
    pub node: usize,
    /// Refined minimizer in chart parameters and in space.
    pub params: Vec<f64>,
    pub x0: Vec<f64>,
    /// Normal part of `ξ` at `x0`.
    pub y0: Vec<f64>,
    pub residual: f64,
    pub interior: bool,
    pub in_v: bool,
    pub min_eigenvalue: f64,
    pub eps_psd: f64,
    /// `min |A(ν)| − ⟨ξ, A(ν)⟩` when the grid minimizer is a boundary node.
    pub boundary_check: Option<f64>,
    pub newton_steps: usize,
}

impl CoverageSample {
    pub fn covered(&self, tolerance: f64) -> bool {
        self.interior && self.in_v && self.residual < tolerance
    }
}

/// Local model at a parameter point: `∂ω`, `∂²ω` in chart coordinates,
/// plus what the V-test needs.
struct Model {
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    residual: f64,
    y0: DVector<f64>,
    x: DVector<f64>,
    fiber: SymMatrix,
    hess_u: SymMatrix,
    g: SymMatrix,
}

fn model(problem: &AbpProblem, sol: &AbpSolution, p: &[f64], xi: &DVector<f64>) -> Option<Model> {
    let surface = &problem.surface;
    let n = surface.dim();
    // the chart is singular on a pole face; evaluate just beside it
    let p: Vec<f64> = surface
        .chart
        .grid()
        .axes()
        .iter()
        .zip(p)
        .map(|(a, &x)| {
            let delta = 1e-6 * a.spacing();
            match (a.lo_end(), a.hi_end()) {
                (Some(AxisEnd::Pole), _) if x < a.lo + delta => a.lo + delta,
                (_, Some(AxisEnd::Pole)) if x > a.hi - delta => a.hi - delta,
                _ => x,
            }
        })
        .collect();
    let p = p.as_slice();
    let jet = surface.chart.jet(p);
    let geo = PointGeometry::from_jet(&jet)?;
    let j = &jet.d1;
    let (grad_amb, hess_amb, _) = sol.interpolate_ambient(surface, p);
    // pull back through the exact chart differential; smooth across poles
    let du = j.transpose() * grad_amb;
    let d2u = SymMatrix::new(j.transpose() * hess_amb * j);
    let jt_xi = j.transpose() * xi;
    let grad = &du - &jt_xi;
    let tangential = j * (geo.g_inv.as_matrix() * &jt_xi);
    let y0 = xi - tangential;
    let hess = DMatrix::from_fn(n, n, |a, b| {
        let mut v = d2u.get(a, b) - jet.d2(a, b).dot(xi);
        for c in 0..n {
            v += geo.gamma(c, a, b) * du[c];
        }
        v
    });
    let fiber = SymMatrix::from_fn(n, |a, b| d2u.get(a, b) - jet.d2(a, b).dot(&y0));
    let residual = (j * (geo.g_inv.as_matrix() * &grad)).norm();
    Some(Model {
        grad,
        hess,
        residual,
        y0,
        x: jet.x,
        fiber,
        hess_u: d2u,
        g: geo.g,
    })
}

/// Grid argmin of `ω` followed by Newton refinement on the interpolated
/// solution. A minimizer pushed onto a boundary face is reported as not
/// interior.
pub fn coverage_oracle(problem: &AbpProblem, sol: &AbpSolution, xi: &[f64], eps_psd: Option<f64>) -> CoverageSample {
    let surface = &problem.surface;
    let grid = surface.chart.grid();
    let n = surface.dim();
    let xi_v = DVector::from_column_slice(xi);
    let omega = |k: usize| sol.u[k] - surface.metric.jets[k].x.dot(&xi_v);
    let node = (0..grid.len())
        .filter(|&k| !grid.is_periodic_duplicate(k))
        .min_by(|&a, &b| omega(a).total_cmp(&omega(b)))
        .expect("non-empty grid");

    let boundary_check = grid.is_boundary(node).then(|| {
        surface
            .boundary
            .iter()
            .filter(|b| b.node == node)
            .map(|b| {
                let a_nu = flux_vector(&problem.field.components[node], &surface.metric, b);
                a_nu.norm() - a_nu.dot(&xi_v)
            })
            .fold(f64::INFINITY, f64::min)
    });

    // a pole node is a single point in space; start from its best ring node
    let start = if grid.is_pole(node) {
        grid.pole_ring(node)
            .into_iter()
            .min_by(|&a, &b| omega(a).total_cmp(&omega(b)))
            .unwrap_or(node)
    } else {
        node
    };
    let mut p = grid.params(start);
    let spacing: Vec<f64> = (0..n).map(|d| grid.spacing(d)).collect();
    let mut on_boundary = false;
    let mut steps = 0;
    for it in 0..MAX_NEWTON {
        steps = it;
        let Some(m) = model(problem, sol, &p, &xi_v) else {
            break;
        };
        if m.residual < 1e-13 {
            break;
        }
        let Some(delta) = m.hess.clone().lu().solve(&(-&m.grad)) else {
            break;
        };
        // at most two cells per step
        let scale = (0..n)
            .map(|d| delta[d].abs() / (2.0 * spacing[d]))
            .fold(1.0_f64, f64::max);
        let mut q: Vec<f64> = (0..n).map(|d| p[d] + delta[d] / scale).collect();
        on_boundary = false;
        for (d, a) in grid.axes().iter().enumerate() {
            if a.lo_end() == Some(AxisEnd::Boundary) && q[d] <= a.lo {
                q[d] = a.lo;
                on_boundary = true;
            }
            if a.hi_end() == Some(AxisEnd::Boundary) && q[d] >= a.hi {
                q[d] = a.hi;
                on_boundary = true;
            }
        }
        q = grid.reflect_through_poles(&q);
        let moved = (0..n).map(|d| (delta[d] / scale / spacing[d]).abs()).fold(0.0, f64::max);
        p = q;
        if moved < 1e-12 {
            break;
        }
    }

    let h = surface.mesh_size();
    match model(problem, sol, &p, &xi_v) {
        Some(m) => {
            let eps = eps_psd.unwrap_or_else(|| {
                let hn = whiten(&m.hess_u, &m.g).map(|w| w.as_matrix().norm()).unwrap_or(0.0);
                10.0 * h * h * (1.0 + hn)
            });
            let lam = whiten(&m.fiber, &m.g).map(|w| min_eigenvalue(&w)).unwrap_or(f64::NEG_INFINITY);
            let (grad_amb, _, _) = sol.interpolate_ambient(surface, &p);
            let in_u = grad_amb.norm_squared() + m.y0.norm_squared() < 1.0;
            CoverageSample {
                xi: xi.to_vec(),
                node,
                params: p,
                x0: m.x.iter().copied().collect(),
                y0: m.y0.iter().copied().collect(),
                residual: m.residual,
                interior: !on_boundary,
                in_v: in_u && lam >= -eps,
                min_eigenvalue: lam,
                eps_psd: eps,
                boundary_check,
                newton_steps: steps,
            }
        }
        None => CoverageSample {
            xi: xi.to_vec(),
            node,
            x0: surface.chart.point(&p).iter().copied().collect(),
            params: p,
            y0: vec![0.0; xi.len()],
            residual: f64::INFINITY,
            interior: !on_boundary,
            in_v: false,
            min_eigenvalue: f64::NEG_INFINITY,
            eps_psd: 0.0,
            boundary_check,
            newton_steps: steps,
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub samples: Vec<CoverageSample>,
    pub tolerance: f64,
    pub covered: usize,
    pub fraction: f64,
    /// Every boundary candidate passed the sign check.
    pub boundary_sign_ok: bool,
}

/// Uniform targets in `B^{n+m}` from a seeded stream; residual tolerance
/// `10 h²`.
pub fn coverage_sweep(
    problem: &AbpProblem,
    sol: &AbpSolution,
    count: usize,
    seed: u64,
    stream: u64,
    eps_psd: Option<f64>,
) -> CoverageReport {
    let nn = problem.surface.chart.ambient_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let targets: Vec<Vec<f64>> = (0..count).map(|_| uniform_in_ball(&mut rng, nn, 1.0)).collect();
    let samples: Vec<CoverageSample> = targets
        .par_iter()
        .map(|xi| coverage_oracle(problem, sol, xi, eps_psd))
        .collect();
    let h = problem.surface.mesh_size();
    let tolerance = 10.0 * h * h;
    let covered = samples.iter().filter(|s| s.covered(tolerance)).count();
    CoverageReport {
        tolerance,
        covered,
        fraction: covered as f64 / count.max(1) as f64,
        boundary_sign_ok: samples.iter().all(|s| s.boundary_check.is_none_or(|c| c > 0.0)),
        samples,
    }
}
