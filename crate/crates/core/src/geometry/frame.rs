use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::chart::{Chart, Jet};
use super::metric::MetricData;
use crate::linalg::SymMatrix;

/// Orthonormal bases of the normal spaces, one list of `m` vectors per node.
#[derive(Clone, Debug)]
pub struct NormalFrame {
    pub basis: Vec<Vec<DVector<f64>>>,
}

impl NormalFrame {
    pub fn codim(&self) -> usize {
        self.basis[0].len()
    }

    /// Ambient vector `Σ_α y^α ν_α` at a node.
    pub fn combine(&self, node: usize, y: &[f64]) -> DVector<f64> {
        let b = &self.basis[node];
        let mut v = DVector::zeros(b[0].len());
        for (c, nu) in y.iter().zip(b) {
            v.axpy(*c, nu, 1.0);
        }
        v
    }
}

/// Tangential projector `J g^{-1} J^T`.
pub fn tangent_projector(d1: &DMatrix<f64>, g_inv: &SymMatrix) -> DMatrix<f64> {
    d1 * g_inv.as_matrix() * d1.transpose()
}

/// Normal projector `I − J g^{-1} J^T` at a regular point.
pub fn normal_projector(d1: &DMatrix<f64>, g_inv: &SymMatrix) -> DMatrix<f64> {
    let nn = d1.nrows();
    DMatrix::identity(nn, nn) - tangent_projector(d1, g_inv)
}

/// Normal projector from a jet, by Gram inverse of the differential.
pub fn normal_projector_at(jet: &Jet) -> Option<DMatrix<f64>> {
    let g = jet.d1.transpose() * &jet.d1;
    let g_inv = g.try_inverse()?;
    let nn = jet.d1.nrows();
    Some(DMatrix::identity(nn, nn) - &jet.d1 * g_inv * jet.d1.transpose())
}

fn node_normal_projector(chart: &Chart, metric: &MetricData, node: usize) -> DMatrix<f64> {
    if metric.regular[node] {
        return normal_projector(&metric.jets[node].d1, &metric.g_inv[node]);
    }
    let ring = chart.grid().pole_ring(node);
    let nn = chart.ambient_dim();
    let mut p = DMatrix::zeros(nn, nn);
    for &k in &ring {
        p += normal_projector(&metric.jets[k].d1, &metric.g_inv[k]);
    }
    let avg = p / ring.len() as f64;
    // replace the averaged matrix by the projector onto its top eigenspace
    eigen_basis(&avg, chart.codimension())
        .iter()
        .fold(DMatrix::zeros(nn, nn), |acc, v| acc + v * v.transpose())
}

/// Top-`m` eigenvectors of a projector, each signed so that its
/// largest-magnitude component is positive.
fn eigen_basis(p: &DMatrix<f64>, m: usize) -> Vec<DVector<f64>> {
    let eig = SymmetricEigen::new(p.clone());
    let mut order: Vec<usize> = (0..p.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order[..m]
        .iter()
        .map(|&i| {
            let v = eig.eigenvectors.column(i).into_owned();
            let lead = v.iter().fold(0.0_f64, |a, &x| if x.abs() > a.abs() { x } else { a });
            if lead < 0.0 {
                -v
            } else {
                v
            }
        })
        .collect()
}

/// Project the reference frame into the new normal space and re-orthonormalize.
fn transport(p: &DMatrix<f64>, reference: &[DVector<f64>]) -> Option<Vec<DVector<f64>>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(reference.len());
    for r in reference {
        let mut v = p * r;
        for _ in 0..2 {
            for q in &out {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm < 0.5 {
            return None;
        }
        out.push(v / norm);
    }
    Some(out)
}

/// Frames aligned along the sweep order (axis 0 fastest): each node starts
/// from the frame of its predecessor on the first axis with positive index.
pub fn normal_frame(chart: &Chart, metric: &MetricData) -> NormalFrame {
    let grid = chart.grid();
    let m = chart.codimension();
    let projectors: Vec<DMatrix<f64>> = {
        use rayon::prelude::*;
        (0..grid.len())
            .into_par_iter()
            .map(|k| node_normal_projector(chart, metric, k))
            .collect()
    };
    let mut basis: Vec<Vec<DVector<f64>>> = Vec::with_capacity(grid.len());
    for (k, p) in projectors.iter().enumerate() {
        let idx = grid.index(k);
        let reference = idx.iter().position(|&i| i > 0).map(|d| {
            let mut prev = idx.clone();
            prev[d] -= 1;
            grid.flat(&prev)
        });
        let frame = match reference {
            Some(r) => transport(p, &basis[r]).unwrap_or_else(|| {
                eigen_basis(p, m)
                    .into_iter()
                    .zip(&basis[r])
                    .map(|(v, q)| if v.dot(q) < 0.0 { -v } else { v })
                    .collect()
            }),
            None => eigen_basis(p, m),
        };
        basis.push(frame);
    }
    NormalFrame { basis }
}

/// `II^α_ij = ⟨∂_ij F, ν_α⟩` per node and normal direction.
#[derive(Clone, Debug)]
pub struct SecondFundamentalForm {
    pub ii: Vec<Vec<SymMatrix>>,
}

impl SecondFundamentalForm {
    /// `⟨II, y⟩ = Σ_α y^α II^α` at a node.
    pub fn contract(&self, node: usize, y: &[f64]) -> SymMatrix {
        let forms = &self.ii[node];
        let n = forms[0].dim();
        let mut out = SymMatrix::zeros(n);
        for (c, f) in y.iter().zip(forms) {
            out = out.add(&f.scale(*c));
        }
        out
    }
}

pub fn second_fundamental_form(
    chart: &Chart,
    metric: &MetricData,
    frame: &NormalFrame,
) -> SecondFundamentalForm {
    let n = chart.intrinsic_dim();
    let ii = (0..metric.len())
        .map(|k| {
            let jet = &metric.jets[k];
            frame.basis[k]
                .iter()
                .map(|nu| SymMatrix::from_fn(n, |i, j| jet.d2(i, j).dot(nu)))
                .collect()
        })
        .collect();
    SecondFundamentalForm { ii }
}

/// Vector-valued second fundamental form at a point, `P⊥ ∂_ij F`.
pub fn ambient_second_form(jet: &Jet, p_perp: &DMatrix<f64>) -> Vec<DVector<f64>> {
    jet.d2.iter().map(|v| p_perp * v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{induced_metric, BaseDomain, ChartSpec};
    use crate::linalg::{whiten, eigenvalues};

    fn setup(spec: ChartSpec, res: usize) -> (Chart, MetricData, NormalFrame, SecondFundamentalForm) {
        let c = spec.build(res).unwrap();
        let m = induced_metric(&c).unwrap();
        let f = normal_frame(&c, &m);
        let ii = second_fundamental_form(&c, &m, &f);
        (c, m, f, ii)
    }

    #[test]
    fn flat_frames() {
        let (_, m, f, ii) = setup(ChartSpec::new(BaseDomain::PolarDisk, 4), 9);
        for k in 0..m.len() {
            let b = &f.basis[k];
            assert_eq!(b.len(), 2);
            for v in b {
                assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12);
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
            assert!(b[0].dot(&b[1]).abs() < 1e-12);
            for form in &ii.ii[k] {
                assert!(form.max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sphere_frame_is_radial_and_continuous() {
        let (c, m, f, ii) = setup(ChartSpec::new(BaseDomain::Sphere, 3), 17);
        for k in 0..m.len() {
            let nu = &f.basis[k][0];
            let x = c.point(&c.grid().params(k));
            assert!((nu - &x).norm() < 1e-10, "node {k}");
            if m.regular[k] {
                // outward normal: II = -g, trace_g II = -2
                let tr = (m.g_inv[k].as_matrix() * ii.ii[k][0].as_matrix()).trace();
                assert!((tr + 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cylinder_principal_curvatures() {
        let (_, m, _, ii) = setup(ChartSpec::new(BaseDomain::Cylinder { z_lo: 0.0, z_hi: 1.0 }, 3), 9);
        for k in 0..m.len() {
            let w = whiten(&ii.ii[k][0], &m.g[k]).unwrap();
            let ev: Vec<f64> = eigenvalues(&w).iter().map(|x| x.abs()).collect();
            let (lo, hi) = (ev[0].min(ev[1]), ev[0].max(ev[1]));
            assert!(lo < 1e-12 && (hi - 1.0).abs() < 1e-12);
        }
    }
}
