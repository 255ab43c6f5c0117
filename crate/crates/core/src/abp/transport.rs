//! The normal-bundle map `Φ(x, y) = ∇u(x) + y`, its Jacobian and the
//! Monte Carlo sweep over `V`.

use nalgebra::{DMatrix, DVector};
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fields::AbpSolution;
use super::problem::AbpProblem;
use crate::geometry::Surface;
use crate::linalg::{det_dense, eigenvalues, min_eigenvalue, whiten, SymMatrix};

/// A point of the normal bundle: base node and frame coefficients of `y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportPoint {
    pub node: usize,
    pub y: Vec<f64>,
    pub in_u: bool,
    pub in_v: bool,
    /// PSD slack used for the `V` test.
    pub eps_psd: f64,
}

impl TransportPoint {
    /// Classifies `(x, y)`; `eps_psd` overrides the default PSD slack.
    pub fn new(surface: &Surface, sol: &AbpSolution, node: usize, y: Vec<f64>, eps_psd: Option<f64>) -> Self {
        let g2 = sol.grad[node].norm_squared();
        let y2: f64 = y.iter().map(|v| v * v).sum();
        let in_u = g2 + y2 < 1.0;
        let eps = eps_psd.unwrap_or_else(|| psd_tolerance(surface, sol, node));
        let in_v = in_u && surface.metric.regular[node] && {
            let m = fiber_matrix(surface, sol, node, &y);
            whiten(&m, &surface.metric.g[node]).is_some_and(|w| min_eigenvalue(&w) >= -eps)
        };
        TransportPoint {
            node,
            y,
            in_u,
            in_v,
            eps_psd: eps,
        }
    }
}

/// `10 h² (1 + |D²u|)`, with the Hessian norm taken in the metric.
pub fn psd_tolerance(surface: &Surface, sol: &AbpSolution, node: usize) -> f64 {
    let h = surface.mesh_size();
    let hn = whiten(&sol.hess[node], &surface.metric.g[node])
        .map(|w| w.as_matrix().norm())
        .unwrap_or(0.0);
    10.0 * h * h * (1.0 + hn)
}

/// `D²u(x) − ⟨II(x), y⟩` in chart components.
pub fn fiber_matrix(surface: &Surface, sol: &AbpSolution, node: usize, y: &[f64]) -> SymMatrix {
    sol.hess[node].sub(&surface.ii.contract(node, y))
}

pub fn transport_map(surface: &Surface, sol: &AbpSolution, p: &TransportPoint) -> DVector<f64> {
    &sol.grad[p.node] + surface.frame.combine(p.node, &p.y)
}

/// `det(D²u − ⟨II, y⟩)` in an orthonormal tangent frame.
pub fn jacobian_determinant(surface: &Surface, sol: &AbpSolution, p: &TransportPoint) -> f64 {
    let m = fiber_matrix(surface, sol, p.node, &p.y);
    let g = &surface.metric.g[p.node];
    det_dense(m.as_matrix()) / det_dense(g.as_matrix())
}

/// Independent oracle: central differences of `Φ` over the chart, with the
/// fiber coordinates transported to neighbouring nodes by projecting the
/// frame onto their normal spaces. Returns the signed ratio of
/// `det[∂Φ | ν]` to `det[∂F | ν]`. `None` when a neighbour is missing or
/// singular.
pub fn fd_jacobian_determinant(surface: &Surface, sol: &AbpSolution, p: &TransportPoint) -> Option<f64> {
    let grid = surface.chart.grid();
    let n = surface.dim();
    let nn = surface.chart.ambient_dim();
    let frame = &surface.frame.basis[p.node];
    let phi_at = |k: usize| -> DVector<f64> {
        let p_perp = DMatrix::identity(nn, nn) - &sol.tangent_proj[k];
        let mut moved: Vec<DVector<f64>> = Vec::with_capacity(frame.len());
        for v in frame {
            let mut w = &p_perp * v;
            for u in &moved {
                w -= u * u.dot(&w);
            }
            let norm = w.norm();
            moved.push(w / norm);
        }
        moved
            .iter()
            .zip(&p.y)
            .fold(sol.grad[k].clone(), |acc, (v, c)| acc + v * *c)
    };
    let mut cols = DMatrix::zeros(nn, nn);
    for a in 0..n {
        let plus = grid.step(p.node, a, 1)?;
        let minus = grid.step(p.node, a, -1)?;
        if !surface.metric.regular[plus] || !surface.metric.regular[minus] {
            return None;
        }
        let d = (phi_at(plus) - phi_at(minus)) / (2.0 * grid.spacing(a));
        cols.set_column(a, &d);
    }
    let mut base = DMatrix::zeros(nn, nn);
    base.view_mut((0, 0), (nn, n)).copy_from(&surface.metric.jets[p.node].d1);
    for (i, v) in frame.iter().enumerate() {
        cols.set_column(n + i, v);
        base.set_column(n + i, v);
    }
    Some(cols.determinant() / base.determinant())
}

/// Draws `count` points of `V`: base nodes by quadrature weight, `y`
/// uniform in the normal ball of radius `sqrt(1 − |∇u|²)`. Rejected draws
/// (outside `V`) are retried up to `50 count` times in total.
pub fn sample_v_points(
    surface: &Surface,
    sol: &AbpSolution,
    count: usize,
    seed: u64,
    stream: u64,
    eps_psd: Option<f64>,
) -> Vec<TransportPoint> {
    let m = surface.codim();
    let Ok(nodes) = WeightedIndex::new(&surface.weights) else {
        return Vec::new();
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut out = Vec::with_capacity(count);
    for _ in 0..50 * count {
        if out.len() == count {
            break;
        }
        let node = nodes.sample(&mut rng);
        let radius = (1.0 - sol.grad[node].norm_squared()).max(0.0).sqrt();
        let y = uniform_in_ball(&mut rng, m, radius);
        let p = TransportPoint::new(surface, sol, node, y, eps_psd);
        if p.in_v {
            out.push(p);
        }
    }
    out
}

pub(crate) fn uniform_in_ball(rng: &mut impl Rng, dim: usize, radius: f64) -> Vec<f64> {
    let dir: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    dir.into_iter().map(|v| v * r / norm).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianSample {
    pub node: usize,
    pub y: Vec<f64>,
    pub det: f64,
    pub bound: f64,
    /// How far below zero `det` may go given the PSD slack of the point.
    pub psd_floor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianBound {
    pub samples: usize,
    pub violations: usize,
    /// Largest of `det − bound` and `−det − psd_floor` over the samples.
    pub max_excess: f64,
    pub tolerance: f64,
    pub records: Vec<JacobianSample>,
}

/// Counts samples with `det DΦ` outside `[−tol, det(A)^{1/(n−1)} + tol]`.
/// A point admitted to `V` with eigenvalues down to `−ε_psd` can have a
/// determinant down to `−ε_psd λ_max^{n−1}`; that floor widens the lower
/// side.
pub fn jacobian_bound_check(
    problem: &AbpProblem,
    sol: &AbpSolution,
    samples: &[TransportPoint],
    tol: f64,
) -> JacobianBound {
    let records: Vec<JacobianSample> = samples
        .par_iter()
        .filter(|p| p.in_v)
        .map(|p| {
            let surface = &problem.surface;
            let m = fiber_matrix(surface, sol, p.node, &p.y);
            let top = whiten(&m, &surface.metric.g[p.node])
                .map(|w| eigenvalues(&w).last().copied().unwrap_or(0.0))
                .unwrap_or(0.0)
                .max(0.0);
            JacobianSample {
                node: p.node,
                y: p.y.clone(),
                det: jacobian_determinant(surface, sol, p),
                bound: problem.integrands.det_power[p.node],
                psd_floor: p.eps_psd * top.powi(surface.dim() as i32 - 1),
            }
        })
        .collect();
    let excess = |r: &JacobianSample| (r.det - r.bound).max(-r.det - r.psd_floor);
    JacobianBound {
        samples: records.len(),
        violations: records.iter().filter(|r| excess(r) > tol).count(),
        max_excess: records.iter().map(excess).fold(f64::NEG_INFINITY, f64::max),
        tolerance: tol,
        records,
    }
}
