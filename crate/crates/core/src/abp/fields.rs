use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::AbpProblem;
use super::solve::{assemble, solve_constrained, SolverOptions};
use crate::error::Result;
use crate::geometry::{tangent_projector, Surface};
use crate::linalg::SymMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub lambda: f64,
    pub multiplier: f64,
    pub iterations: usize,
    pub interior_residual: f64,
    pub boundary_residual: f64,
    pub mean_residual: f64,
    pub compatibility_residual: f64,
}

/// The zero-mean Neumann potential and its derivative fields.
#[derive(Clone, Debug)]
pub struct AbpSolution {
    pub u: Vec<f64>,
    /// Chart partials `∂_a u`.
    pub du: Vec<DVector<f64>>,
    /// Covariant Hessian `∂²u − Γ ∂u` in chart components.
    pub hess: Vec<SymMatrix>,
    /// Ambient gradient `J g^{-1} du`.
    pub grad: Vec<DVector<f64>>,
    /// Ambient Hessian `J g^{-1} D²u g^{-1} J^T`.
    pub hess_ambient: Vec<DMatrix<f64>>,
    /// For each ambient coordinate `c`, `Σ_α ν_α^c J g^{-1} II^α g^{-1} J^T`,
    /// so that `⟨II, ξ⟩` is `Σ_c ξ_c ii_ambient[c]`.
    pub ii_ambient: Vec<Vec<DMatrix<f64>>>,
    pub tangent_proj: Vec<DMatrix<f64>>,
    pub stats: SolveStats,
}

pub fn solve(problem: &AbpProblem, options: &SolverOptions) -> Result<AbpSolution> {
    solve_from(problem, options, None)
}

/// Solve starting from an initial guess (its mean is irrelevant).
pub fn solve_from(problem: &AbpProblem, options: &SolverOptions, initial: Option<&[f64]>) -> Result<AbpSolution> {
    problem.check_compatibility()?;
    let sys = assemble(problem)?;
    let lin = solve_constrained(&sys, options, initial)?;
    let stats = SolveStats {
        lambda: problem.lambda,
        multiplier: lin.multiplier,
        iterations: lin.iterations,
        interior_residual: lin.interior_residual,
        boundary_residual: lin.boundary_residual,
        mean_residual: lin.mean_residual,
        compatibility_residual: problem.compatibility_residual(),
    };
    Ok(AbpSolution::from_nodal(&problem.surface, lin.u, stats))
}

impl AbpSolution {
    /// Derives gradient and Hessian fields from nodal values by grid
    /// finite differences at the chart's stencil order.
    pub fn from_nodal(surface: &Surface, u: Vec<f64>, stats: SolveStats) -> Self {
        let chart = &surface.chart;
        let grid = chart.grid();
        let metric = &surface.metric;
        let n = grid.dim();
        let nn = chart.ambient_dim();
        let order = chart.mode().stencil_order();
        let apply = |w: Option<Vec<(usize, f64)>>| w.map_or(0.0, |w| w.iter().map(|&(k, c)| c * u[k]).sum());

        struct Node {
            du: DVector<f64>,
            hess: SymMatrix,
            grad: DVector<f64>,
            hess_ambient: DMatrix<f64>,
            ii_ambient: Vec<DMatrix<f64>>,
            proj: DMatrix<f64>,
        }
        let nodes: Vec<Node> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let du = DVector::from_iterator(n, (0..n).map(|d| apply(grid.fd_weights(k, d, 1, order, false))));
                if !metric.regular[k] {
                    return Node {
                        du,
                        hess: SymMatrix::zeros(n),
                        grad: DVector::zeros(nn),
                        hess_ambient: DMatrix::zeros(nn, nn),
                        ii_ambient: vec![DMatrix::zeros(nn, nn); nn],
                        proj: DMatrix::zeros(nn, nn),
                    };
                }
                let hess = SymMatrix::from_fn(n, |a, b| {
                    let mut v = apply(grid.fd_weights_second(k, a, b, order, false));
                    for c in 0..n {
                        v -= metric.gamma(k, c, a, b) * du[c];
                    }
                    v
                });
                let j = &metric.jets[k].d1;
                let jg = j * metric.g_inv[k].as_matrix();
                let grad = &jg * &du;
                let hess_ambient = &jg * hess.as_matrix() * jg.transpose();
                let forms: Vec<DMatrix<f64>> = surface.ii.ii[k]
                    .iter()
                    .map(|f| &jg * f.as_matrix() * jg.transpose())
                    .collect();
                let ii_ambient = (0..nn)
                    .map(|c| {
                        let mut acc = DMatrix::zeros(nn, nn);
                        for (nu, f) in surface.frame.basis[k].iter().zip(&forms) {
                            acc += f * nu[c];
                        }
                        acc
                    })
                    .collect();
                Node {
                    du,
                    hess,
                    grad,
                    hess_ambient,
                    ii_ambient,
                    proj: tangent_projector(j, &metric.g_inv[k]),
                }
            })
            .collect();
        let mut sol = AbpSolution {
            u,
            du: Vec::with_capacity(nodes.len()),
            hess: Vec::with_capacity(nodes.len()),
            grad: Vec::with_capacity(nodes.len()),
            hess_ambient: Vec::with_capacity(nodes.len()),
            ii_ambient: Vec::with_capacity(nodes.len()),
            tangent_proj: Vec::with_capacity(nodes.len()),
            stats,
        };
        for node in nodes {
            sol.du.push(node.du);
            sol.hess.push(node.hess);
            sol.grad.push(node.grad);
            sol.hess_ambient.push(node.hess_ambient);
            sol.ii_ambient.push(node.ii_ambient);
            sol.tangent_proj.push(node.proj);
        }
        // pole nodes: ring averages of ambient fields, exact normal projector
        for k in 0..grid.len() {
            if metric.regular[k] {
                continue;
            }
            let ring = grid.pole_ring(k);
            let r = ring.len() as f64;
            sol.grad[k] = ring.iter().fold(DVector::zeros(nn), |a, &i| a + &sol.grad[i]) / r;
            sol.hess_ambient[k] = ring.iter().fold(DMatrix::zeros(nn, nn), |a, &i| a + &sol.hess_ambient[i]) / r;
            sol.ii_ambient[k] = (0..nn)
                .map(|c| ring.iter().fold(DMatrix::zeros(nn, nn), |a, &i| a + &sol.ii_ambient[i][c]) / r)
                .collect();
            let normal = surface.frame.basis[k]
                .iter()
                .fold(DMatrix::zeros(nn, nn), |a, v| a + v * v.transpose());
            sol.tangent_proj[k] = DMatrix::identity(nn, nn) - normal;
        }
        sol
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// `⟨II, ξ⟩` at a node as an ambient matrix.
    pub fn ii_along(&self, node: usize, xi: &DVector<f64>) -> DMatrix<f64> {
        let forms = &self.ii_ambient[node];
        let nn = xi.len();
        forms
            .iter()
            .zip(xi.iter())
            .fold(DMatrix::zeros(nn, nn), |a, (f, c)| a + f * *c)
    }

    /// Multilinear interpolation of the ambient fields at a parameter point.
    pub fn interpolate_ambient(
        &self,
        surface: &Surface,
        p: &[f64],
    ) -> (DVector<f64>, DMatrix<f64>, Vec<DMatrix<f64>>) {
        let nn = surface.chart.ambient_dim();
        let mut grad = DVector::zeros(nn);
        let mut hess = DMatrix::zeros(nn, nn);
        let mut ii = vec![DMatrix::zeros(nn, nn); nn];
        for (k, w) in surface.chart.grid().interpolation_weights(p) {
            grad += &self.grad[k] * w;
            hess += &self.hess_ambient[k] * w;
            for c in 0..nn {
                ii[c] += &self.ii_ambient[k][c] * w;
            }
        }
        (grad, hess, ii)
    }

    /// Multilinear interpolation of the chart-component fields.
    pub fn interpolate_chart(&self, surface: &Surface, p: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n = surface.dim();
        let mut du = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);
        for (k, w) in surface.chart.grid().interpolation_weights(p) {
            du += &self.du[k] * w;
            hess += self.hess[k].as_matrix() * w;
        }
        (du, hess)
    }
}
