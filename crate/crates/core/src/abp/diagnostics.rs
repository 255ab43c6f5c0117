//! Integrated volume bound, equality-case rigidity diagnostics and the
//! mesh-error budget of the solved potential.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fields::AbpSolution;
use super::problem::AbpProblem;
use super::transport::uniform_in_ball;
use crate::error::{Error, Result};
use crate::linalg::{adjugate, eigenvalues, unit_ball_volume, whiten, SymMatrix};
use crate::tensorfield::divergence;

/// Lower bound of the reported mesh error; below it the discrete fields
/// agree to solver precision.
pub const MESH_ERROR_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeBound {
    /// `(n+m) |B^{n+m}|`.
    pub lhs: f64,
    /// `m |B^m| ∫ det(A)^{1/(n−1)}`.
    pub rhs: f64,
    /// `(rhs − lhs) / lhs`.
    pub slack: f64,
    pub tolerance: f64,
    pub holds: bool,
    pub sigma: f64,
    /// `|B^{n+m}| (1 − σ^{n+m})`.
    pub annulus_lower: f64,
    /// `∫_Ω det(A)^{1/(n−1)} · |{σ² < |∇u|² + |y|² < 1}|`.
    pub annulus_fiber: f64,
    /// `(m/2) |B^m| (1 − σ²) ∫_Ω det(A)^{1/(n−1)}`.
    pub annulus_upper: f64,
    pub annulus_holds: bool,
}

/// `tol` is relative to the left-hand side. The annulus chain is checked
/// at relative quadrature tolerance `10 h²`.
pub fn volume_bound_check(problem: &AbpProblem, sol: &AbpSolution, sigma: f64, tol: f64) -> VolumeBound {
    let surface = &problem.surface;
    let n = surface.dim();
    let m = surface.codim();
    let bm = unit_ball_volume(m);
    let lhs = (n + m) as f64 * unit_ball_volume(n + m);
    let rhs = m as f64 * bm * problem.det_integral();
    let slack = (rhs - lhs) / lhs;

    let half = m as f64 / 2.0;
    let omega: Vec<bool> = sol.grad.iter().map(|g| g.norm_squared() < 1.0).collect();
    let on_omega = |f: &dyn Fn(usize) -> f64| -> Vec<f64> {
        (0..surface.len())
            .map(|k| if omega[k] { f(k) } else { 0.0 })
            .collect()
    };
    let det = &problem.integrands.det_power;
    let fiber = on_omega(&|k| {
        let a = sol.grad[k].norm_squared();
        det[k] * bm * ((1.0 - a).max(0.0).powf(half) - (sigma * sigma - a).max(0.0).powf(half))
    });
    let det_omega = surface.integrate(&on_omega(&|k| det[k]));
    let annulus_lower = unit_ball_volume(n + m) * (1.0 - sigma.powi((n + m) as i32));
    let annulus_fiber = surface.integrate(&fiber);
    let annulus_upper = half * bm * (1.0 - sigma * sigma) * det_omega;
    let h = surface.mesh_size();
    let qtol = 10.0 * h * h;
    VolumeBound {
        lhs,
        rhs,
        slack,
        tolerance: tol,
        holds: slack >= -tol,
        sigma,
        annulus_lower,
        annulus_fiber,
        annulus_upper,
        annulus_holds: annulus_lower <= annulus_fiber * (1.0 + qtol) && annulus_fiber <= annulus_upper * (1.0 + qtol),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidityDiagnostics {
    /// `sup_x sup_{|η|=1} |⟨II, η⟩|` with the trace norm on the tangent
    /// space (the unit sphere gives 2).
    pub sup_ii: f64,
    pub sup_div_a: f64,
    /// `max |A − cof D²u|` in the operator norm.
    pub cofactor_residual: f64,
    /// `max_{∂Σ} |1 − |∇u||`; zero on closed surfaces.
    pub boundary_grad_deficit: f64,
    /// Hausdorff distance between `∇u(Σ)` and the closed unit n-ball in the
    /// mean tangent plane.
    pub gradient_image_hausdorff: f64,
}

impl RigidityDiagnostics {
    pub fn values(&self) -> [(&'static str, f64); 5] {
        [
            ("sup_ii", self.sup_ii),
            ("sup_div_a", self.sup_div_a),
            ("cofactor_residual", self.cofactor_residual),
            ("boundary_grad_deficit", self.boundary_grad_deficit),
            ("gradient_image_hausdorff", self.gradient_image_hausdorff),
        ]
    }
}

pub fn rigidity_diagnostics(problem: &AbpProblem, sol: &AbpSolution) -> RigidityDiagnostics {
    let surface = &problem.surface;
    let metric = &surface.metric;
    let nodes: Vec<usize> = (0..surface.len())
        .filter(|&k| metric.regular[k] && !surface.chart.grid().is_periodic_duplicate(k))
        .collect();

    let directions = normal_directions(surface.codim());
    let sup_ii = nodes
        .par_iter()
        .map(|&k| {
            directions
                .iter()
                .filter_map(|eta| whiten(&surface.ii.contract(k, eta), &metric.g[k]))
                .map(|w| eigenvalues(&w).iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);

    let div = divergence(&problem.field, metric).norms(metric);
    let sup_div_a = nodes.iter().map(|&k| div[k]).fold(0.0, f64::max);

    // in a g-orthonormal frame the cofactor tensor is the adjugate
    let cofactor_residual = nodes
        .par_iter()
        .filter_map(|&k| {
            let a = whiten(&problem.field.components[k], &metric.g[k])?;
            let h = whiten(&sol.hess[k], &metric.g[k])?;
            let diff = SymMatrix::new(a.as_matrix() - adjugate(h.as_matrix()));
            Some(eigenvalues(&diff).iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
        })
        .reduce(|| 0.0, f64::max);

    let boundary_grad_deficit = surface
        .boundary
        .iter()
        .map(|b| (1.0 - sol.grad[b.node].norm()).abs())
        .fold(0.0, f64::max);

    RigidityDiagnostics {
        sup_ii,
        sup_div_a,
        cofactor_residual,
        boundary_grad_deficit,
        gradient_image_hausdorff: gradient_image_hausdorff(problem, sol),
    }
}

/// Unit normal directions sampled for the supremum over `η`. The trace
/// norm is even in `η`, so half the circle suffices for `m = 2`.
fn normal_directions(m: usize) -> Vec<Vec<f64>> {
    match m {
        0 => Vec::new(),
        1 => vec![vec![1.0]],
        2 => (0..360)
            .map(|i| {
                let t = std::f64::consts::PI * i as f64 / 360.0;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mut out: Vec<Vec<f64>> = (0..m)
                .map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            for _ in 0..2000 {
                let v = uniform_in_ball(&mut rng, m, 1.0);
                let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if r > 1e-3 {
                    out.push(v.iter().map(|x| x / r).collect());
                }
            }
            out
        }
    }
}

/// Points of the gradient image are compared with the ball in the top
/// eigenplane of the mean tangent projector. For surfaces the image is the
/// union of the cell images (two triangles per cell); otherwise the node
/// images.
fn gradient_image_hausdorff(problem: &AbpProblem, sol: &AbpSolution) -> f64 {
    let surface = &problem.surface;
    let grid = surface.chart.grid();
    let n = surface.dim();
    let nn = surface.chart.ambient_dim();
    let total: f64 = surface.weights.iter().sum();
    let mean = sol
        .tangent_proj
        .iter()
        .zip(&surface.weights)
        .fold(DMatrix::zeros(nn, nn), |a, (p, w)| a + p * *w)
        / total;
    let eig = SymmetricEigen::new(mean);
    let mut order: Vec<usize> = (0..nn).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let plane = DMatrix::from_fn(nn, n, |i, j| eig.eigenvectors[(i, order[j])]);

    let nodes: Vec<usize> = (0..grid.len()).filter(|&k| !grid.is_periodic_duplicate(k)).collect();
    let z: Vec<DVector<f64>> = (0..grid.len()).map(|k| plane.transpose() * &sol.grad[k]).collect();
    let outward = nodes
        .iter()
        .map(|&k| {
            let off = (&sol.grad[k] - &plane * &z[k]).norm();
            let radial = (z[k].norm() - 1.0).max(0.0);
            off.hypot(radial)
        })
        .fold(0.0, f64::max);

    let targets = ball_targets(n);
    let inward = if n == 2 {
        let tris: Vec<[[f64; 2]; 3]> = grid
            .cells()
            .flat_map(|base| {
                let c = grid.cell_corners(base);
                let p = |i: usize| [z[c[i]][0], z[c[i]][1]];
                [[p(0), p(1), p(3)], [p(0), p(3), p(2)]]
            })
            .collect();
        targets
            .par_iter()
            .map(|b| {
                let t = [b[0], b[1]];
                tris.iter().fold(f64::INFINITY, |best, tri| {
                    if bbox_distance(tri, t) >= best {
                        best
                    } else {
                        best.min(triangle_distance(tri, t))
                    }
                })
            })
            .reduce(|| 0.0, f64::max)
    } else {
        targets
            .par_iter()
            .map(|b| {
                let b = DVector::from_column_slice(b);
                nodes.iter().map(|&k| (&z[k] - &b).norm()).fold(f64::INFINITY, f64::min)
            })
            .reduce(|| 0.0, f64::max)
    };
    outward.max(inward)
}

fn ball_targets(n: usize) -> Vec<Vec<f64>> {
    if n == 2 {
        let mut out = vec![vec![0.0, 0.0]];
        for (radius, count) in [(0.25, 64), (0.5, 128), (0.75, 256), (1.0, 1024)] {
            for i in 0..count {
                let t = std::f64::consts::TAU * i as f64 / count as f64;
                out.push(vec![radius * t.cos(), radius * t.sin()]);
            }
        }
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut out: Vec<Vec<f64>> = (0..2000).map(|_| uniform_in_ball(&mut rng, n, 1.0)).collect();
    for _ in 0..2000 {
        let v = uniform_in_ball(&mut rng, n, 1.0);
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-3 {
            out.push(v.iter().map(|x| x / r).collect());
        }
    }
    out
}

fn bbox_distance(tri: &[[f64; 2]; 3], p: [f64; 2]) -> f64 {
    let mut d2 = 0.0;
    for a in 0..2 {
        let lo = tri.iter().map(|v| v[a]).fold(f64::INFINITY, f64::min);
        let hi = tri.iter().map(|v| v[a]).fold(f64::NEG_INFINITY, f64::max);
        let e = (lo - p[a]).max(p[a] - hi).max(0.0);
        d2 += e * e;
    }
    d2.sqrt()
}

fn triangle_distance(tri: &[[f64; 2]; 3], p: [f64; 2]) -> f64 {
    let cross = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let s = [
        cross(tri[0], tri[1], p),
        cross(tri[1], tri[2], p),
        cross(tri[2], tri[0], p),
    ];
    if s.iter().all(|&v| v >= 0.0) || s.iter().all(|&v| v <= 0.0) {
        return 0.0;
    }
    (0..3)
        .map(|i| segment_distance(tri[i], tri[(i + 1) % 3], p))
        .fold(f64::INFINITY, f64::min)
}

fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (ap[0] - t * ab[0]).hypot(ap[1] - t * ab[1])
}

/// Richardson estimate of the Hessian error: the largest operator-norm gap
/// of the ambient Hessians at nodes shared with the half-resolution solve,
/// divided by `2² − 1`, floored at [`MESH_ERROR_FLOOR`].
pub fn hessian_mesh_error(
    fine: (&AbpProblem, &AbpSolution),
    coarse: (&AbpProblem, &AbpSolution),
) -> Result<f64> {
    let gf = fine.0.surface.chart.grid();
    let gc = coarse.0.surface.chart.grid();
    let ok = gf.dim() == gc.dim() && (0..gf.dim()).all(|d| gf.axis(d).points == 2 * gc.axis(d).points - 1);
    if !ok {
        return Err(Error::GridMismatch(
            "coarse grid must have (N+1)/2 points per axis".to_string(),
        ));
    }
    let gap = (0..gc.len())
        .into_par_iter()
        .map(|kc| {
            let idx: Vec<usize> = gc.index(kc).iter().map(|i| 2 * i).collect();
            let kf = gf.flat(&idx);
            let diff = SymMatrix::new(&fine.1.hess_ambient[kf] - &coarse.1.hess_ambient[kc]);
            eigenvalues(&diff).iter().fold(0.0_f64, |a, v| a.max(v.abs()))
        })
        .reduce(|| 0.0, f64::max);
    Ok((gap / 3.0).max(MESH_ERROR_FLOOR))
}
