use nalgebra::DMatrix;
use rayon::prelude::*;

use super::chart::{Chart, Jet};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Rank threshold on the smallest singular value of the chart differential.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// Metric quantities at a single parameter point.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub g: SymMatrix,
    pub g_inv: SymMatrix,
    pub sqrt_det_g: f64,
    /// `∂_k g_ij`, one matrix per `k`.
    pub dg: Vec<SymMatrix>,
    /// `Γ^k_ij` stored at `k * n * n + i * n + j`.
    pub christoffel: Vec<f64>,
}

impl PointGeometry {
    /// Returns `None` when the differential has rank below `n`.
    pub fn from_jet(jet: &Jet) -> Option<Self> {
        let n = jet.d1.ncols();
        if smallest_singular_value(&jet.d1) <= RANK_TOLERANCE {
            return None;
        }
        let g = SymMatrix::new(jet.d1.transpose() * &jet.d1);
        let g_inv = SymMatrix::new(g.as_matrix().clone().try_inverse()?);
        let sqrt_det_g = crate::linalg::det(&g).sqrt();
        let dg: Vec<SymMatrix> = (0..n)
            .map(|k| {
                SymMatrix::from_fn(n, |i, j| {
                    jet.d2(k, i).dot(&jet.d1.column(j)) + jet.d1.column(i).dot(jet.d2(k, j))
                })
            })
            .collect();
        let christoffel = christoffel_from_dg(&g_inv, &dg);
        Some(PointGeometry {
            g,
            g_inv,
            sqrt_det_g,
            dg,
            christoffel,
        })
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    pub fn gamma(&self, k: usize, i: usize, j: usize) -> f64 {
        let n = self.dim();
        self.christoffel[k * n * n + i * n + j]
    }
}

/// `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)`.
pub fn christoffel_from_dg(g_inv: &SymMatrix, dg: &[SymMatrix]) -> Vec<f64> {
    let n = g_inv.dim();
    let mut out = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for l in 0..n {
                    s += g_inv.get(k, l) * (dg[i].get(j, l) + dg[j].get(i, l) - dg[l].get(i, j));
                }
                out[k * n * n + i * n + j] = 0.5 * s;
                out[k * n * n + j * n + i] = 0.5 * s;
            }
        }
    }
    out
}

pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |a, &v| a.min(v))
}

/// Per-node metric data of a chart. Nodes on collapsed (pole) faces are
/// flagged non-regular: their inverse metric and Christoffel symbols are
/// zero and they carry zero volume density.
#[derive(Clone, Debug)]
pub struct MetricData {
    pub g: Vec<SymMatrix>,
    pub g_inv: Vec<SymMatrix>,
    pub sqrt_det_g: Vec<f64>,
    pub christoffel: Vec<Vec<f64>>,
    pub dg: Vec<Vec<SymMatrix>>,
    pub regular: Vec<bool>,
    pub jets: Vec<Jet>,
}

impl MetricData {
    pub fn dim(&self) -> usize {
        self.g[0].dim()
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    pub fn gamma(&self, node: usize, k: usize, i: usize, j: usize) -> f64 {
        let n = self.dim();
        self.christoffel[node][k * n * n + i * n + j]
    }

    /// Bundles the data of one regular node.
    pub fn point(&self, node: usize) -> PointGeometry {
        PointGeometry {
            g: self.g[node].clone(),
            g_inv: self.g_inv[node].clone(),
            sqrt_det_g: self.sqrt_det_g[node],
            dg: self.dg[node].clone(),
            christoffel: self.christoffel[node].clone(),
        }
    }
}

pub fn induced_metric(chart: &Chart) -> Result<MetricData> {
    let grid = chart.grid();
    let n = chart.intrinsic_dim();
    let nodes: Vec<(Jet, Option<PointGeometry>)> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let jet = chart.node_jet(k);
            let pg = if grid.is_pole(k) {
                None
            } else {
                PointGeometry::from_jet(&jet)
            };
            (jet, pg)
        })
        .collect();
    let mut out = MetricData {
        g: Vec::with_capacity(grid.len()),
        g_inv: Vec::with_capacity(grid.len()),
        sqrt_det_g: Vec::with_capacity(grid.len()),
        christoffel: Vec::with_capacity(grid.len()),
        dg: Vec::with_capacity(grid.len()),
        regular: Vec::with_capacity(grid.len()),
        jets: Vec::with_capacity(grid.len()),
    };
    for (k, (jet, pg)) in nodes.into_iter().enumerate() {
        match pg {
            Some(p) => {
                out.g.push(p.g);
                out.g_inv.push(p.g_inv);
                out.sqrt_det_g.push(p.sqrt_det_g);
                out.christoffel.push(p.christoffel);
                out.dg.push(p.dg);
                out.regular.push(true);
            }
            None if grid.is_pole(k) => {
                out.g.push(SymMatrix::new(jet.d1.transpose() * &jet.d1));
                out.g_inv.push(SymMatrix::zeros(n));
                out.sqrt_det_g.push(0.0);
                out.christoffel.push(vec![0.0; n * n * n]);
                out.dg.push(vec![SymMatrix::zeros(n); n]);
                out.regular.push(false);
            }
            None => {
                return Err(Error::DegenerateImmersion {
                    node: k,
                    params: grid.params(k),
                    sigma_min: smallest_singular_value(&jet.d1),
                })
            }
        }
        out.jets.push(jet);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BaseDomain, ChartSpec};
    use crate::poly::Polynomial;

    #[test]
    fn flat_square_is_euclidean() {
        let c = ChartSpec::new(
            BaseDomain::Box {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            3,
        )
        .build(5)
        .unwrap();
        let m = induced_metric(&c).unwrap();
        for k in 0..m.len() {
            assert_eq!(m.g[k], SymMatrix::identity(2));
            assert!(m.christoffel[k].iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn graph_metric_entry() {
        let map = vec![
            Polynomial::variable(0),
            Polynomial::variable(1),
            Polynomial::monomial(1.0, &[1, 1]),
        ];
        let c = ChartSpec::new(
            BaseDomain::Box {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            3,
        )
        .with_map(map)
        .build(5)
        .unwrap();
        let m = induced_metric(&c).unwrap();
        let node = c.grid().flat(&[1, 3]);
        let x2 = c.grid().params(node)[1];
        assert!((m.g[node].get(0, 0) - (1.0 + x2 * x2)).abs() < 1e-15);
    }

    #[test]
    fn sphere_equator_density_and_christoffel() {
        let c = ChartSpec::new(BaseDomain::Sphere, 3).build(9).unwrap();
        let m = induced_metric(&c).unwrap();
        let eq = c.grid().flat(&[4, 2]);
        assert!((m.sqrt_det_g[eq] - 1.0).abs() < 1e-14);
        // Γ^θ_φφ = -sinθ cosθ, Γ^φ_θφ = cotθ
        let node = c.grid().flat(&[2, 3]);
        let th = c.grid().params(node)[0];
        assert!((m.gamma(node, 0, 1, 1) + th.sin() * th.cos()).abs() < 1e-14);
        assert!((m.gamma(node, 1, 0, 1) - th.cos() / th.sin()).abs() < 1e-14);
        assert!(!m.regular[0]);
    }

    #[test]
    fn degenerate_immersion_is_reported() {
        // (x, y) -> (x, x^2, 0): rank one everywhere
        let map = vec![
            Polynomial::variable(0),
            Polynomial::monomial(1.0, &[2]),
            Polynomial::zero(),
        ];
        let c = ChartSpec::new(
            BaseDomain::Box {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            3,
        )
        .with_map(map)
        .build(4)
        .unwrap();
        assert!(matches!(
            induced_metric(&c),
            Err(Error::DegenerateImmersion { node: 0, .. })
        ));
    }
}
