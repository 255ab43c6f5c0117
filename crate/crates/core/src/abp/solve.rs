//! Multilinear finite elements on the chart grid for the divergence-form
//! Neumann problem, with a zero-mean gauge.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::AbpProblem;
use super::sparse::{dot, pcg_rank_one, CsrMatrix};
use crate::error::{Error, Result};
use crate::geometry::Grid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-10,
            max_iterations: None,
        }
    }
}

/// Node-to-unknown map after seam identification and pole collapse.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub node_to_dof: Vec<usize>,
    pub ndof: usize,
}

impl DofMap {
    pub fn new(grid: &Grid) -> Self {
        let mut node_to_dof = vec![usize::MAX; grid.len()];
        let mut ndof = 0;
        for k in 0..grid.len() {
            let c = grid.canonical(k);
            if node_to_dof[c] == usize::MAX {
                node_to_dof[c] = ndof;
                ndof += 1;
            }
            node_to_dof[k] = node_to_dof[c];
        }
        DofMap { node_to_dof, ndof }
    }
}

/// Assembled system `K u = f` with mass weights `w` for the gauge.
#[derive(Clone, Debug)]
pub struct Assembled {
    pub dofs: DofMap,
    pub stiffness: CsrMatrix,
    pub load: Vec<f64>,
    pub mass: Vec<f64>,
    /// Unknowns touched by a boundary sample.
    pub on_boundary: Vec<bool>,
}

const GAUSS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Element matrices with coefficient `sqrt(g) g^{-1} A g^{-1}` at 2-point
/// Gauss nodes per axis. The interior load integrates the multilinear
/// interpolant of `s` over the dual cell of each node (the Galerkin load
/// is inconsistent at collapsed pole rows); the boundary flux is lumped.
/// The small quadrature mismatch against the node-weight compatibility is
/// absorbed by the gauge multiplier.
pub fn assemble(problem: &AbpProblem) -> Result<Assembled> {
    let chart = &problem.surface.chart;
    let grid = chart.grid();
    let n = grid.dim();
    let dofs = DofMap::new(grid);
    let spacing: Vec<f64> = (0..n).map(|d| grid.spacing(d)).collect();
    let cell_volume: f64 = spacing.iter().product();
    let cells: Vec<usize> = grid.cells().collect();
    let ncorner = 1usize << n;
    let nq = 1usize << n;
    let elements: Vec<(Vec<(usize, usize, f64)>, Vec<(usize, f64)>)> = cells
        .par_iter()
        .map(|&base| {
            let corners = grid.cell_corners(base);
            let p0 = grid.params(base);
            let mut ke = DMatrix::<f64>::zeros(ncorner, ncorner);
            let mut fe = vec![0.0; ncorner];
            for q in 0..nq {
                let t: Vec<f64> = (0..n).map(|d| GAUSS[(q >> d) & 1]).collect();
                let p: Vec<f64> = (0..n).map(|d| p0[d] + t[d] * spacing[d]).collect();
                let jet = chart.jet(&p);
                let g = jet.d1.transpose() * &jet.d1;
                let sqrt_g = g.determinant().sqrt();
                let g_inv = g
                    .try_inverse()
                    .ok_or_else(|| Error::InvalidChart(format!("singular metric at quadrature point {p:?}")))?;
                let a = problem.field.value_at(chart, &p)?;
                let dmu = sqrt_g * cell_volume / nq as f64;
                let coeff = &g_inv * a.as_matrix() * &g_inv * dmu;
                let grads: Vec<DVector<f64>> = (0..ncorner)
                    .map(|mask| {
                        DVector::from_iterator(
                            n,
                            (0..n).map(|d| {
                                let mut v = if mask & (1 << d) != 0 { 1.0 } else { -1.0 } / spacing[d];
                                for e in (0..n).filter(|&e| e != d) {
                                    v *= if mask & (1 << e) != 0 { t[e] } else { 1.0 - t[e] };
                                }
                                v
                            }),
                        )
                    })
                    .collect();
                for i in 0..ncorner {
                    let ci = &coeff * &grads[i];
                    for j in 0..ncorner {
                        ke[(i, j)] += ci.dot(&grads[j]);
                    }
                }
            }
            // interior load over dual cells: corner `c` owns the sub-box of
            // the cell adjacent to it
            for (c, f) in fe.iter_mut().enumerate() {
                for q in 0..nq {
                    let t: Vec<f64> = (0..n)
                        .map(|d| 0.5 * (((c >> d) & 1) as f64 + GAUSS[(q >> d) & 1]))
                        .collect();
                    let p: Vec<f64> = (0..n).map(|d| p0[d] + t[d] * spacing[d]).collect();
                    let d1 = chart.jet(&p).d1;
                    let sqrt_g = (d1.transpose() * &d1).determinant().max(0.0).sqrt();
                    let s_q: f64 = (0..ncorner)
                        .map(|mask| {
                            let w: f64 = (0..n)
                                .map(|d| if mask & (1 << d) != 0 { t[d] } else { 1.0 - t[d] })
                                .product();
                            w * problem.source[corners[mask]]
                        })
                        .sum();
                    *f -= s_q * sqrt_g * cell_volume / (nq * ncorner) as f64;
                }
            }
            let mut out = Vec::with_capacity(ncorner * ncorner);
            for i in 0..ncorner {
                for j in 0..ncorner {
                    out.push((dofs.node_to_dof[corners[i]], dofs.node_to_dof[corners[j]], ke[(i, j)]));
                }
            }
            let loads = corners.iter().zip(fe).map(|(&c, f)| (dofs.node_to_dof[c], f)).collect();
            Ok((out, loads))
        })
        .collect::<Result<_>>()?;
    let mut load = vec![0.0; dofs.ndof];
    let mut triplets = Vec::with_capacity(elements.len() * ncorner * ncorner);
    for (ke, fe) in elements {
        triplets.extend(ke);
        for (d, f) in fe {
            load[d] += f;
        }
    }
    let stiffness = CsrMatrix::from_triplets(dofs.ndof, triplets);

    let weights = &problem.surface.weights;
    let mut mass = vec![0.0; dofs.ndof];
    for k in 0..grid.len() {
        mass[dofs.node_to_dof[k]] += weights[k];
    }
    let mut on_boundary = vec![false; dofs.ndof];
    for (b, v) in problem.surface.boundary.iter().zip(&problem.flux) {
        let d = dofs.node_to_dof[b.node];
        load[d] += b.weight * v;
        on_boundary[d] = true;
    }
    Ok(Assembled {
        dofs,
        stiffness,
        load,
        mass,
        on_boundary,
    })
}

/// Raw output of the constrained linear solve.
#[derive(Clone, Debug)]
pub struct LinearSolution {
    /// Values per grid node.
    pub u: Vec<f64>,
    pub multiplier: f64,
    pub iterations: usize,
    /// Residual of the bordered system on interior / boundary unknowns and
    /// of the gauge row, relative to the load norm.
    pub interior_residual: f64,
    pub boundary_residual: f64,
    pub mean_residual: f64,
}

/// Solves `[K w; w^T 0][u; μ] = [f; 0]`. Since `K 1 = 0`, `μ = 1^T f / 1^T w`;
/// the remaining system `(K + c w w^T) u = f − μ w` is SPD.
pub fn solve_constrained(sys: &Assembled, options: &SolverOptions, initial: Option<&[f64]>) -> Result<LinearSolution> {
    let ndof = sys.dofs.ndof;
    let total_mass: f64 = sys.mass.iter().sum();
    let mu = sys.load.iter().sum::<f64>() / total_mass;
    let rhs: Vec<f64> = sys.load.iter().zip(&sys.mass).map(|(f, w)| f - mu * w).collect();
    let diag_max = sys.stiffness.diagonal().iter().fold(0.0_f64, |a, &b| a.max(b));
    let c = diag_max / dot(&sys.mass, &sys.mass);
    let x0 = match initial {
        Some(u) => {
            let mut x = vec![0.0; ndof];
            for (k, &d) in sys.dofs.node_to_dof.iter().enumerate() {
                x[d] = u[k];
            }
            // the gauge fixes constants; drop the guess's mean
            let mean = dot(&x, &sys.mass) / total_mass;
            x.iter_mut().for_each(|v| *v -= mean);
            x
        }
        None => vec![0.0; ndof],
    };
    let max_iter = options.max_iterations.unwrap_or(20 * ndof + 100);
    let out = pcg_rank_one(&sys.stiffness, &sys.mass, c, &rhs, x0, options.tolerance, max_iter)?;

    let mut ku = vec![0.0; ndof];
    sys.stiffness.mul_vec(&out.x, &mut ku);
    let fnorm = sys.load.iter().fold(0.0_f64, |a, &b| a.max(b.abs())).max(f64::MIN_POSITIVE);
    let (mut ri, mut rb) = (0.0_f64, 0.0_f64);
    for i in 0..ndof {
        let r = (ku[i] + mu * sys.mass[i] - sys.load[i]).abs() / fnorm;
        if sys.on_boundary[i] {
            rb = rb.max(r);
        } else {
            ri = ri.max(r);
        }
    }
    let mean_residual = dot(&out.x, &sys.mass).abs() / total_mass;
    Ok(LinearSolution {
        u: sys.dofs.node_to_dof.iter().map(|&d| out.x[d]).collect(),
        multiplier: mu,
        iterations: out.iterations,
        interior_residual: ri,
        boundary_residual: rb,
        mean_residual,
    })
}
