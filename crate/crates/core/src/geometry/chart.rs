//! Parametric charts `F = G ∘ b` where `b` is a built-in base
//! parametrization and `G` a polynomial map into the ambient space.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::grid::{Axis, AxisEnd, AxisKind, Grid};
use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::stencil;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseDomain {
    /// Identity parametrization of an axis-aligned box in `R^n`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Unit disk in polar coordinates `(r, theta)`.
    PolarDisk,
    /// Unit sphere `S^2 ⊂ R^3` in coordinates `(theta, phi)`.
    Sphere,
    /// Unit-radius cylinder `(cos phi, sin phi, z)` in coordinates `(phi, z)`.
    Cylinder { z_lo: f64, z_hi: f64 },
}

impl BaseDomain {
    pub fn intrinsic_dim(&self) -> usize {
        match self {
            BaseDomain::Box { lo, .. } => lo.len(),
            _ => 2,
        }
    }

    /// Dimension of the base image space (input dimension of `G`).
    pub fn image_dim(&self) -> usize {
        match self {
            BaseDomain::Box { lo, .. } => lo.len(),
            BaseDomain::PolarDisk => 2,
            BaseDomain::Sphere | BaseDomain::Cylinder { .. } => 3,
        }
    }

    fn axes(&self, points: usize) -> Vec<Axis> {
        let bounded = |lo, hi, a, b| Axis {
            lo,
            hi,
            points,
            kind: AxisKind::Bounded { lo: a, hi: b },
        };
        let periodic = |lo, hi| Axis {
            lo,
            hi,
            points,
            kind: AxisKind::Periodic,
        };
        use AxisEnd::*;
        match self {
            BaseDomain::Box { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(&l, &h)| bounded(l, h, Boundary, Boundary))
                .collect(),
            BaseDomain::PolarDisk => vec![bounded(0.0, 1.0, Pole, Boundary), periodic(0.0, TAU)],
            BaseDomain::Sphere => vec![bounded(0.0, PI, Pole, Pole), periodic(0.0, TAU)],
            BaseDomain::Cylinder { z_lo, z_hi } => {
                vec![periodic(0.0, TAU), bounded(*z_lo, *z_hi, Boundary, Boundary)]
            }
        }
    }

    /// Base point, first derivatives (k x n) and second derivatives
    /// (indexed `a * n + b`).
    fn jet(&self, p: &[f64]) -> (DVector<f64>, DMatrix<f64>, Vec<DVector<f64>>) {
        match self {
            BaseDomain::Box { lo, .. } => {
                let n = lo.len();
                (
                    DVector::from_column_slice(p),
                    DMatrix::identity(n, n),
                    vec![DVector::zeros(n); n * n],
                )
            }
            BaseDomain::PolarDisk => {
                let (r, t) = (p[0], p[1]);
                let (s, c) = t.sin_cos();
                let x = DVector::from_column_slice(&[r * c, r * s]);
                let d1 = DMatrix::from_column_slice(2, 2, &[c, s, -r * s, r * c]);
                let rt = DVector::from_column_slice(&[-s, c]);
                let d2 = vec![
                    DVector::zeros(2),
                    rt.clone(),
                    rt,
                    DVector::from_column_slice(&[-r * c, -r * s]),
                ];
                (x, d1, d2)
            }
            BaseDomain::Sphere => {
                let (th, ph) = (p[0], p[1]);
                let (st, ct) = th.sin_cos();
                let (sp, cp) = ph.sin_cos();
                let x = DVector::from_column_slice(&[st * cp, st * sp, ct]);
                let d1 = DMatrix::from_column_slice(3, 2, &[ct * cp, ct * sp, -st, -st * sp, st * cp, 0.0]);
                let tp = DVector::from_column_slice(&[-ct * sp, ct * cp, 0.0]);
                let d2 = vec![
                    -x.clone(),
                    tp.clone(),
                    tp,
                    DVector::from_column_slice(&[-st * cp, -st * sp, 0.0]),
                ];
                (x, d1, d2)
            }
            BaseDomain::Cylinder { .. } => {
                let (ph, z) = (p[0], p[1]);
                let (s, c) = ph.sin_cos();
                let x = DVector::from_column_slice(&[c, s, z]);
                let d1 = DMatrix::from_column_slice(3, 2, &[-s, c, 0.0, 0.0, 0.0, 1.0]);
                let d2 = vec![
                    DVector::from_column_slice(&[-c, -s, 0.0]),
                    DVector::zeros(3),
                    DVector::zeros(3),
                    DVector::zeros(3),
                ];
                (x, d1, d2)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    /// Closed-form derivatives of the immersion.
    #[default]
    Exact,
    /// Central differences of order 2 with the grid step.
    Fd2,
    /// Central differences of order 4 with the grid step.
    Fd4,
}

impl DerivativeMode {
    /// Stencil order used for grid-sampled fields.
    pub fn stencil_order(self) -> usize {
        match self {
            DerivativeMode::Exact | DerivativeMode::Fd2 => 2,
            DerivativeMode::Fd4 => 4,
        }
    }
}

/// Position and derivatives of the immersion at a parameter point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub x: DVector<f64>,
    /// Columns are `∂F/∂x^a`.
    pub d1: DMatrix<f64>,
    /// `∂²F/∂x^a∂x^b` at index `a * n + b`.
    pub d2: Vec<DVector<f64>>,
}

impl Jet {
    pub fn d2(&self, a: usize, b: usize) -> &DVector<f64> {
        &self.d2[a * self.d1.ncols() + b]
    }
}

/// Serializable description of a chart, independent of resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub domain: BaseDomain,
    /// Components of `G`; defaults to the identity padded with zeros.
    #[serde(default)]
    pub map: Option<Vec<Polynomial>>,
    pub ambient_dim: usize,
    #[serde(default)]
    pub derivative_mode: DerivativeMode,
}

impl ChartSpec {
    pub fn new(domain: BaseDomain, ambient_dim: usize) -> Self {
        ChartSpec {
            domain,
            map: None,
            ambient_dim,
            derivative_mode: DerivativeMode::Exact,
        }
    }

    pub fn with_map(mut self, map: Vec<Polynomial>) -> Self {
        self.map = Some(map);
        self
    }

    pub fn with_mode(mut self, mode: DerivativeMode) -> Self {
        self.derivative_mode = mode;
        self
    }

    pub fn codimension(&self) -> usize {
        self.ambient_dim.saturating_sub(self.domain.intrinsic_dim())
    }

    pub fn build(&self, resolution: usize) -> Result<Chart> {
        Chart::new(self.clone(), resolution)
    }
}

#[derive(Clone, Debug)]
pub struct Chart {
    spec: ChartSpec,
    map: Vec<Polynomial>,
    grid: Grid,
}

impl Chart {
    pub fn new(spec: ChartSpec, resolution: usize) -> Result<Self> {
        let k = spec.domain.image_dim();
        let n = spec.domain.intrinsic_dim();
        let big_n = spec.ambient_dim;
        if n == 0 {
            return Err(Error::InvalidChart("empty parameter box".into()));
        }
        if let BaseDomain::Box { lo, hi } = &spec.domain {
            if lo.len() != hi.len() || lo.iter().zip(hi).any(|(l, h)| !(h > l)) {
                return Err(Error::InvalidChart(format!("bad box {lo:?} x {hi:?}")));
            }
        }
        if let BaseDomain::Cylinder { z_lo, z_hi } = &spec.domain {
            if !(z_hi > z_lo) {
                return Err(Error::InvalidChart("cylinder needs z_hi > z_lo".into()));
            }
        }
        if resolution < 3 {
            return Err(Error::InvalidChart(format!("resolution {resolution} < 3")));
        }
        if spec.derivative_mode == DerivativeMode::Fd4 && (resolution < 7 || resolution % 2 == 0) {
            return Err(Error::InvalidChart(
                "fourth-order mode needs an odd resolution >= 7".into(),
            ));
        }
        let map = match &spec.map {
            Some(m) => {
                if m.len() != big_n {
                    return Err(Error::InvalidChart(format!(
                        "map has {} components, ambient_dim is {big_n}",
                        m.len()
                    )));
                }
                if let Some(p) = m.iter().find(|p| p.nvars() > k) {
                    return Err(Error::InvalidChart(format!(
                        "map component uses {} variables, base has {k}",
                        p.nvars()
                    )));
                }
                m.clone()
            }
            None => {
                if big_n < k {
                    return Err(Error::InvalidChart(format!(
                        "ambient_dim {big_n} smaller than base dimension {k}"
                    )));
                }
                (0..big_n)
                    .map(|i| if i < k { Polynomial::variable(i) } else { Polynomial::zero() })
                    .collect()
            }
        };
        if big_n <= n {
            return Err(Error::InvalidChart(format!(
                "ambient_dim {big_n} must exceed intrinsic dim {n}"
            )));
        }
        let grid = Grid::new(spec.domain.axes(resolution));
        Ok(Chart { spec, map, grid })
    }

    pub fn spec(&self) -> &ChartSpec {
        &self.spec
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.map.len()
    }

    pub fn codimension(&self) -> usize {
        self.ambient_dim() - self.intrinsic_dim()
    }

    pub fn resolution(&self) -> usize {
        self.grid.axis(0).points
    }

    pub fn mode(&self) -> DerivativeMode {
        self.spec.derivative_mode
    }

    pub fn map(&self) -> &[Polynomial] {
        &self.map
    }

    /// Same chart at another resolution.
    pub fn with_resolution(&self, resolution: usize) -> Result<Chart> {
        Chart::new(self.spec.clone(), resolution)
    }

    pub fn point(&self, p: &[f64]) -> DVector<f64> {
        let (b, _, _) = self.spec.domain.jet(p);
        let bs = b.as_slice();
        DVector::from_iterator(self.map.len(), self.map.iter().map(|g| g.eval(bs)))
    }

    /// Closed-form jet by the chain rule through `G`.
    pub fn exact_jet(&self, p: &[f64]) -> Jet {
        let n = self.intrinsic_dim();
        let big_n = self.ambient_dim();
        let (b, db, d2b) = self.spec.domain.jet(p);
        let bs = b.as_slice();
        let mut x = DVector::zeros(big_n);
        let mut d1 = DMatrix::zeros(big_n, n);
        let mut d2 = vec![DVector::zeros(big_n); n * n];
        for (c, g) in self.map.iter().enumerate() {
            x[c] = g.eval(bs);
            let grad = DVector::from_vec(g.gradient(bs));
            let hess = g.hessian(bs);
            for a in 0..n {
                d1[(c, a)] = grad.dot(&db.column(a));
            }
            for a in 0..n {
                for bb in 0..n {
                    let quad = (db.column(a).transpose() * &hess * db.column(bb))[(0, 0)];
                    d2[a * n + bb][c] = quad + grad.dot(&d2b[a * n + bb]);
                }
            }
        }
        Jet { x, d1, d2 }
    }

    /// Steps available below/above `p` along axis `d` before leaving the box
    /// through a boundary face. Poles and periodic axes do not limit.
    fn gaps_at(&self, p: &[f64], d: usize) -> (usize, usize) {
        let a = self.grid.axis(d);
        let h = a.spacing();
        let lo = match a.lo_end() {
            Some(AxisEnd::Boundary) => ((p[d] - a.lo) / h + 1e-9).floor().max(0.0) as usize,
            _ => 8,
        };
        let hi = match a.hi_end() {
            Some(AxisEnd::Boundary) => ((a.hi - p[d]) / h + 1e-9).floor().max(0.0) as usize,
            _ => 8,
        };
        (lo, hi)
    }

    fn fd_weights_at(&self, p: &[f64], d: usize, deriv: usize) -> Vec<(f64, f64)> {
        let order = self.mode().stencil_order();
        let (lo, hi) = self.gaps_at(p, d);
        let h = self.grid.spacing(d);
        stencil::stencil(lo, hi, deriv, order)
            .expect("resolution validated against stencil size")
            .into_iter()
            .filter(|&(_, w)| w != 0.0)
            .map(|(o, w)| (o as f64 * h, w / h.powi(deriv as i32)))
            .collect()
    }

    /// Jet by finite differences of the immersion with the grid step.
    pub fn fd_jet(&self, p: &[f64]) -> Jet {
        let n = self.intrinsic_dim();
        let big_n = self.ambient_dim();
        let x = self.point(p);
        let shifted = |moves: &[(usize, f64)]| {
            let mut q = p.to_vec();
            for &(d, s) in moves {
                q[d] += s;
            }
            self.point(&q)
        };
        let mut d1 = DMatrix::zeros(big_n, n);
        let mut d2 = vec![DVector::zeros(big_n); n * n];
        for a in 0..n {
            let mut col = DVector::zeros(big_n);
            for (s, w) in self.fd_weights_at(p, a, 1) {
                col += shifted(&[(a, s)]) * w;
            }
            d1.set_column(a, &col);
            let mut v = DVector::zeros(big_n);
            for (s, w) in self.fd_weights_at(p, a, 2) {
                v += shifted(&[(a, s)]) * w;
            }
            d2[a * n + a] = v;
        }
        for a in 0..n {
            for b in (a + 1)..n {
                let mut v = DVector::zeros(big_n);
                for (sa, wa) in self.fd_weights_at(p, a, 1) {
                    for (sb, wb) in self.fd_weights_at(p, b, 1) {
                        v += shifted(&[(a, sa), (b, sb)]) * (wa * wb);
                    }
                }
                d2[b * n + a] = v.clone();
                d2[a * n + b] = v;
            }
        }
        Jet { x, d1, d2 }
    }

    pub fn jet(&self, p: &[f64]) -> Jet {
        match self.mode() {
            DerivativeMode::Exact => self.exact_jet(p),
            DerivativeMode::Fd2 | DerivativeMode::Fd4 => self.fd_jet(p),
        }
    }

    pub fn node_jet(&self, node: usize) -> Jet {
        self.jet(&self.grid.params(node))
    }
}

/// Inclusion into one more ambient dimension (appended zero coordinate).
pub fn lift_codimension(chart: &Chart) -> Chart {
    let mut spec = chart.spec.clone();
    let mut map = chart.map.clone();
    map.push(Polynomial::zero());
    spec.ambient_dim += 1;
    spec.map = Some(map.clone());
    Chart {
        spec,
        map,
        grid: chart.grid.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_and_fd_jets_agree() {
        let spec = ChartSpec::new(BaseDomain::Sphere, 3).with_mode(DerivativeMode::Fd4);
        let fd = spec.build(129).unwrap();
        let ex = ChartSpec::new(BaseDomain::Sphere, 3).build(65).unwrap();
        let p = [0.7, 2.1];
        let (a, b) = (fd.jet(&p), ex.jet(&p));
        assert!((a.d1.clone() - b.d1.clone()).amax() < 1e-6);
        for i in 0..4 {
            assert!((&a.d2[i] - &b.d2[i]).amax() < 1e-5);
        }
    }

    #[test]
    fn polynomial_map_chain_rule() {
        // graph of x*y over the unit square
        let map = vec![
            Polynomial::variable(0),
            Polynomial::variable(1),
            Polynomial::monomial(1.0, &[1, 1]),
        ];
        let spec = ChartSpec::new(
            BaseDomain::Box {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            3,
        )
        .with_map(map);
        let c = spec.build(5).unwrap();
        let j = c.exact_jet(&[0.5, 0.25]);
        assert_eq!(j.x[2], 0.125);
        assert_eq!(j.d1[(2, 0)], 0.25);
        assert_eq!(j.d1[(2, 1)], 0.5);
        assert_eq!(j.d2(0, 1)[2], 1.0);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ChartSpec::new(BaseDomain::PolarDisk, 4).build(2).is_err());
        assert!(ChartSpec::new(BaseDomain::PolarDisk, 2).build(9).is_err());
        assert!(ChartSpec::new(BaseDomain::PolarDisk, 4)
            .with_mode(DerivativeMode::Fd4)
            .build(8)
            .is_err());
    }

    #[test]
    fn lift_appends_zero_coordinate() {
        let c = ChartSpec::new(BaseDomain::Sphere, 3).build(9).unwrap();
        let l = lift_codimension(&c);
        assert_eq!(l.ambient_dim(), 4);
        let p = [0.3, 0.4];
        assert_eq!(l.point(&p).rows(0, 3), c.point(&p));
        assert_eq!(l.point(&p)[3], 0.0);
    }
}
