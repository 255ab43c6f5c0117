//! Symmetric (0,2)-tensor fields on a chart and the derived quantities
//! entering the Sobolev functional: covariant divergence, contraction with
//! the second fundamental form, conormal flux, determinant and cofactor.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    normal_projector_at, BoundarySample, Chart, DerivativeMode, Jet, MetricData, PointGeometry, SecondFundamentalForm,
    Surface,
};
use crate::linalg::{self, whiten, SpdCertificate, SymMatrix, PSD_TOLERANCE};
use crate::poly::Polynomial;

/// How a tensor field is produced. Ambient-position inputs are evaluated
/// at `F(p)`; chart-diagonal entries at the chart parameters `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TensorSpec {
    /// `A = g`.
    Metric,
    /// `A = f g` with `f` a function of the ambient position.
    Conformal { f: Polynomial },
    /// `A = J^T M J`: an ambient symmetric matrix restricted to the tangent space.
    Ambient { matrix: Vec<Vec<Polynomial>> },
    /// `A = diag(e_1(p), ..., e_n(p))` in chart coordinates.
    ChartDiagonal { entries: Vec<Polynomial> },
    /// Cofactor tensor of the covariant Hessian of `u`, a function of the
    /// ambient position.
    CofactorOfPotential { u: Polynomial },
    Sum { parts: Vec<TensorSpec> },
    Scaled { factor: f64, inner: Box<TensorSpec> },
    /// Per-node chart components, row-major `n x n`.
    Tabulated { values: Vec<Vec<f64>> },
}

fn ambient_matrix(rows: &[Vec<Polynomial>], x: &[f64]) -> DMatrix<f64> {
    let nn = rows.len();
    let m = DMatrix::from_fn(nn, nn, |i, j| rows[i][j].eval(x));
    (&m + m.transpose()) * 0.5
}

/// Covariant Hessian of an ambient function restricted to the chart:
/// `J^T H J + ⟨∇u, P⊥ ∂_ab F⟩`.
pub fn covariant_hessian_of_ambient(u: &Polynomial, jet: &Jet) -> Option<SymMatrix> {
    let x = jet.x.as_slice();
    let n = jet.d1.ncols();
    let grad = DVector::from_vec(u.gradient(x));
    let hess = u.hessian(x);
    let p_perp = normal_projector_at(jet)?;
    let normal_grad = p_perp * grad;
    let base = jet.d1.transpose() * hess * &jet.d1;
    Some(SymMatrix::from_fn(n, |a, b| base[(a, b)] + normal_grad.dot(jet.d2(a, b))))
}

/// `T = det(g^{-1} S) g S^{-1} g`, the tensor with `T ∘ S = det(S) g`.
pub fn cofactor_at(s: &SymMatrix, g: &SymMatrix) -> Result<SymMatrix> {
    let cert = SpdCertificate::for_matrix(
        &whiten(s, g).ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: f64::NAN,
            tolerance: PSD_TOLERANCE,
        })?,
        PSD_TOLERANCE,
    );
    if !cert.is_valid() {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: cert.min_eigenvalue,
            tolerance: PSD_TOLERANCE,
        });
    }
    let det_rel = linalg::det(s) / linalg::det(g);
    let s_inv = s.as_matrix().clone().try_inverse().expect("SPD matrix is invertible");
    Ok(SymMatrix::new(g.as_matrix() * s_inv * g.as_matrix() * det_rel))
}

impl TensorSpec {
    fn needs_grid(&self) -> bool {
        match self {
            TensorSpec::Tabulated { .. } => true,
            TensorSpec::Sum { parts } => parts.iter().any(|p| p.needs_grid()),
            TensorSpec::Scaled { inner, .. } => inner.needs_grid(),
            _ => false,
        }
    }

    /// Value at a parameter point from its jet. `node` is used only by
    /// tabulated inputs. Returns zero at degenerate (pole) points for specs
    /// that need an inverse metric.
    pub fn value(&self, p: &[f64], jet: &Jet, interp: Option<&[(usize, f64)]>) -> Result<SymMatrix> {
        let n = jet.d1.ncols();
        let x = jet.x.as_slice();
        Ok(match self {
            TensorSpec::Metric => SymMatrix::new(jet.d1.transpose() * &jet.d1),
            TensorSpec::Conformal { f } => SymMatrix::new(jet.d1.transpose() * &jet.d1 * f.eval(x)),
            TensorSpec::Ambient { matrix } => {
                SymMatrix::new(jet.d1.transpose() * ambient_matrix(matrix, x) * &jet.d1)
            }
            TensorSpec::ChartDiagonal { entries } => {
                SymMatrix::from_diagonal(&entries.iter().map(|e| e.eval(p)).collect::<Vec<_>>())
            }
            TensorSpec::CofactorOfPotential { u } => match PointGeometry::from_jet(jet) {
                Some(pg) => {
                    let s = covariant_hessian_of_ambient(u, jet).expect("regular jet");
                    cofactor_at(&s, &pg.g)?
                }
                None => SymMatrix::zeros(n),
            },
            TensorSpec::Sum { parts } => {
                let mut acc = SymMatrix::zeros(n);
                for part in parts {
                    acc = acc.add(&part.value(p, jet, interp)?);
                }
                acc
            }
            TensorSpec::Scaled { factor, inner } => inner.value(p, jet, interp)?.scale(*factor),
            TensorSpec::Tabulated { values } => {
                let w = interp.ok_or_else(|| Error::GridMismatch("tabulated field needs grid weights".into()))?;
                let mut m = DMatrix::zeros(n, n);
                for &(k, c) in w {
                    let row = values
                        .get(k)
                        .ok_or_else(|| Error::GridMismatch(format!("no tabulated value for node {k}")))?;
                    if row.len() != n * n {
                        return Err(Error::GridMismatch(format!(
                            "tabulated value at node {k} has {} entries, expected {}",
                            row.len(),
                            n * n
                        )));
                    }
                    m += DMatrix::from_row_slice(n, n, row) * c;
                }
                SymMatrix::new(m)
            }
        })
    }

    /// Closed-form chart derivatives `∂_k A` where available.
    fn exact_derivatives(&self, p: &[f64], jet: &Jet) -> Option<Vec<SymMatrix>> {
        let n = jet.d1.ncols();
        let x = jet.x.as_slice();
        let dg = |k: usize| {
            SymMatrix::from_fn(n, |i, j| {
                jet.d2(k, i).dot(&jet.d1.column(j)) + jet.d1.column(i).dot(jet.d2(k, j))
            })
        };
        match self {
            TensorSpec::Metric => Some((0..n).map(dg).collect()),
            TensorSpec::Conformal { f } => {
                let fv = f.eval(x);
                let grad = DVector::from_vec(f.gradient(x));
                let g = SymMatrix::new(jet.d1.transpose() * &jet.d1);
                Some(
                    (0..n)
                        .map(|k| {
                            let df = grad.dot(&jet.d1.column(k));
                            g.scale(df).add(&dg(k).scale(fv))
                        })
                        .collect(),
                )
            }
            TensorSpec::Ambient { matrix } => {
                let m = ambient_matrix(matrix, x);
                let nn = matrix.len();
                Some(
                    (0..n)
                        .map(|k| {
                            let mut dm = DMatrix::zeros(nn, nn);
                            for (c, dx) in jet.d1.column(k).iter().enumerate() {
                                if *dx == 0.0 {
                                    continue;
                                }
                                let dmc = DMatrix::from_fn(nn, nn, |i, j| {
                                    0.5 * (matrix[i][j].gradient(x)[c] + matrix[j][i].gradient(x)[c])
                                });
                                dm += dmc * *dx;
                            }
                            let dj = DMatrix::from_fn(jet.d1.nrows(), n, |r, a| jet.d2(k, a)[r]);
                            let t = dj.transpose() * &m * &jet.d1;
                            SymMatrix::new(&t + t.transpose() + jet.d1.transpose() * dm * &jet.d1)
                        })
                        .collect(),
                )
            }
            TensorSpec::ChartDiagonal { entries } => Some(
                (0..n)
                    .map(|k| {
                        SymMatrix::from_diagonal(
                            &entries
                                .iter()
                                .map(|e| e.gradient(&pad(p, e.nvars()))[k])
                                .collect::<Vec<_>>(),
                        )
                    })
                    .collect(),
            ),
            TensorSpec::Sum { parts } => {
                let mut acc = vec![SymMatrix::zeros(n); n];
                for part in parts {
                    for (a, d) in acc.iter_mut().zip(part.exact_derivatives(p, jet)?) {
                        *a = a.add(&d);
                    }
                }
                Some(acc)
            }
            TensorSpec::Scaled { factor, inner } => Some(
                inner
                    .exact_derivatives(p, jet)?
                    .into_iter()
                    .map(|d| d.scale(*factor))
                    .collect(),
            ),
            TensorSpec::CofactorOfPotential { .. } | TensorSpec::Tabulated { .. } => None,
        }
    }
}

fn pad(p: &[f64], len: usize) -> Vec<f64> {
    let mut v = p.to_vec();
    if v.len() < len {
        v.resize(len, 0.0);
    }
    v
}

/// A tensor field sampled at every grid node in chart coordinates.
#[derive(Clone, Debug)]
pub struct TensorField {
    pub spec: TensorSpec,
    pub components: Vec<SymMatrix>,
    /// `∂_k A` per node.
    pub derivatives: Vec<Vec<SymMatrix>>,
    pub ellipticity: SpdCertificate,
    /// Overall factor applied to `spec` (set by normalization).
    pub scale: f64,
}

/// Chart-parameter derivative of a node-sampled symmetric field by grid
/// finite differences, avoiding pole rows.
fn grid_derivatives(chart: &Chart, values: &[SymMatrix], node: usize) -> Vec<SymMatrix> {
    let grid = chart.grid();
    let n = grid.dim();
    let order = chart.mode().stencil_order();
    (0..n)
        .map(|d| match grid.fd_weights(node, d, 1, order, true) {
            Some(w) => {
                let mut acc = DMatrix::zeros(n, n);
                for (k, c) in w {
                    acc += values[k].as_matrix() * c;
                }
                SymMatrix::new(acc)
            }
            None => SymMatrix::zeros(n),
        })
        .collect()
}

/// Fourth-order central differences of the closure with a fine step.
fn closure_derivatives(spec: &TensorSpec, chart: &Chart, p: &[f64]) -> Result<Vec<SymMatrix>> {
    let n = p.len();
    let mut out = Vec::with_capacity(n);
    for d in 0..n {
        let delta = 1e-3 * chart.grid().spacing(d);
        let mut acc = SymMatrix::zeros(n);
        for (s, w) in [(-2.0, 1.0 / 12.0), (-1.0, -2.0 / 3.0), (1.0, 2.0 / 3.0), (2.0, -1.0 / 12.0)] {
            let mut q = p.to_vec();
            q[d] += s * delta;
            let v = spec.value(&q, &chart.exact_jet(&q), None)?;
            acc = acc.add(&v.scale(w / delta));
        }
        out.push(acc);
    }
    Ok(out)
}

impl TensorField {
    pub fn from_spec(spec: TensorSpec, surface: &Surface) -> Result<Self> {
        let chart = &surface.chart;
        let metric = &surface.metric;
        let n = chart.intrinsic_dim();
        if n < 2 {
            return Err(Error::UnsupportedDimension(n));
        }
        let grid = chart.grid();
        if let Some(len) = tabulated_len(&spec) {
            if len != grid.len() {
                return Err(Error::GridMismatch(format!(
                    "tabulated field has {len} nodes, chart has {}",
                    grid.len()
                )));
            }
        }
        let components: Vec<SymMatrix> = (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let p = grid.params(k);
                spec.value(&p, &metric.jets[k], Some(&[(k, 1.0)]))
            })
            .collect::<Result<_>>()?;
        let derivatives = node_derivatives(&spec, chart, metric, &components)?;
        let field = TensorField {
            spec,
            components,
            derivatives,
            ellipticity: SpdCertificate {
                min_eigenvalue: f64::INFINITY,
                tolerance: PSD_TOLERANCE,
            },
            scale: 1.0,
        };
        field.certify(metric)
    }

    /// Builds a field from per-node chart components.
    pub fn tabulated(components: Vec<SymMatrix>, surface: &Surface) -> Result<Self> {
        let values = components
            .iter()
            .map(|m| m.as_matrix().transpose().iter().copied().collect())
            .collect();
        Self::from_spec(TensorSpec::Tabulated { values }, surface)
    }

    fn certify(mut self, metric: &MetricData) -> Result<Self> {
        let mut worst = (f64::INFINITY, 0usize);
        for k in 0..self.components.len() {
            if !metric.regular[k] {
                continue;
            }
            let ev = match whiten(&self.components[k], &metric.g[k]) {
                Some(w) => linalg::min_eigenvalue(&w),
                None => f64::NAN,
            };
            if !(ev >= worst.0) {
                worst = (ev, k);
            }
        }
        self.ellipticity = SpdCertificate {
            min_eigenvalue: worst.0,
            tolerance: PSD_TOLERANCE,
        };
        if !self.ellipticity.is_valid() {
            return Err(Error::NotUniformlyPositive {
                node: worst.1,
                min_eigenvalue: worst.0,
            });
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// The field `λ A`.
    pub fn scaled(&self, lambda: f64) -> TensorField {
        TensorField {
            spec: self.spec.clone(),
            components: self.components.iter().map(|m| m.scale(lambda)).collect(),
            derivatives: self
                .derivatives
                .iter()
                .map(|ds| ds.iter().map(|d| d.scale(lambda)).collect())
                .collect(),
            ellipticity: SpdCertificate {
                min_eigenvalue: self.ellipticity.min_eigenvalue * lambda,
                tolerance: self.ellipticity.tolerance,
            },
            scale: self.scale * lambda,
        }
    }

    /// Value at an arbitrary parameter point (used at quadrature points).
    pub fn value_at(&self, chart: &Chart, p: &[f64]) -> Result<SymMatrix> {
        let jet = chart.jet(p);
        let interp = if self.spec.needs_grid() {
            Some(chart.grid().interpolation_weights(p))
        } else {
            None
        };
        Ok(self.spec.value(p, &jet, interp.as_deref())?.scale(self.scale))
    }
}

fn tabulated_len(spec: &TensorSpec) -> Option<usize> {
    match spec {
        TensorSpec::Tabulated { values } => Some(values.len()),
        TensorSpec::Sum { parts } => parts.iter().find_map(tabulated_len),
        TensorSpec::Scaled { inner, .. } => tabulated_len(inner),
        _ => None,
    }
}

fn node_derivatives(
    spec: &TensorSpec,
    chart: &Chart,
    metric: &MetricData,
    components: &[SymMatrix],
) -> Result<Vec<Vec<SymMatrix>>> {
    let grid = chart.grid();
    let n = grid.dim();
    let exact = chart.mode() == DerivativeMode::Exact;
    match spec {
        TensorSpec::Metric => Ok(metric.dg.clone()),
        TensorSpec::Sum { parts } if parts.len() > 1 => {
            let mut acc = vec![vec![SymMatrix::zeros(n); n]; grid.len()];
            for part in parts {
                let vals: Vec<SymMatrix> = (0..grid.len())
                    .map(|k| part.value(&grid.params(k), &metric.jets[k], Some(&[(k, 1.0)])))
                    .collect::<Result<_>>()?;
                for (a, d) in acc.iter_mut().zip(node_derivatives(part, chart, metric, &vals)?) {
                    for (x, y) in a.iter_mut().zip(d) {
                        *x = x.add(&y);
                    }
                }
            }
            Ok(acc)
        }
        _ if exact && !spec.needs_grid() => (0..grid.len())
            .into_par_iter()
            .map(|k| {
                if !metric.regular[k] {
                    return Ok(vec![SymMatrix::zeros(n); n]);
                }
                let p = grid.params(k);
                match spec.exact_derivatives(&p, &metric.jets[k]) {
                    Some(d) => Ok(d),
                    None => closure_derivatives(spec, chart, &p),
                }
            })
            .collect(),
        _ => Ok((0..grid.len())
            .into_par_iter()
            .map(|k| grid_derivatives(chart, components, k))
            .collect()),
    }
}

/// Lower-index covector field per node.
#[derive(Clone, Debug)]
pub struct TangentCovector {
    pub components: Vec<DVector<f64>>,
}

impl TangentCovector {
    /// `|ω|_g` per node (zero at non-regular nodes).
    pub fn norms(&self, metric: &MetricData) -> Vec<f64> {
        self.components
            .iter()
            .zip(&metric.g_inv)
            .map(|(w, gi)| (w.transpose() * gi.as_matrix() * w)[(0, 0)].max(0.0).sqrt())
            .collect()
    }
}

/// Normal-frame components per node.
#[derive(Clone, Debug)]
pub struct NormalField {
    pub components: Vec<DVector<f64>>,
}

impl NormalField {
    pub fn norms(&self) -> Vec<f64> {
        self.components.iter().map(|v| v.norm()).collect()
    }
}

/// `(div A)_j = g^{ki}(∂_k A_ij − Γ^l_ki A_lj − Γ^l_kj A_il)`.
pub fn divergence(a: &TensorField, metric: &MetricData) -> TangentCovector {
    let n = a.dim();
    let components = (0..metric.len())
        .map(|node| {
            let mut out = DVector::zeros(n);
            if !metric.regular[node] {
                return out;
            }
            let gi = &metric.g_inv[node];
            let am = &a.components[node];
            let da = &a.derivatives[node];
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    for i in 0..n {
                        let gki = gi.get(k, i);
                        if gki == 0.0 {
                            continue;
                        }
                        let mut d = da[k].get(i, j);
                        for l in 0..n {
                            d -= metric.gamma(node, l, k, i) * am.get(l, j) + metric.gamma(node, l, k, j) * am.get(i, l);
                        }
                        s += gki * d;
                    }
                }
                out[j] = s;
            }
            out
        })
        .collect();
    TangentCovector { components }
}

/// `⟨A, II⟩^α = g^{ik} g^{jl} A_ij II^α_kl`.
pub fn contract_with_second_form(a: &TensorField, ii: &SecondFundamentalForm, metric: &MetricData) -> NormalField {
    let components = (0..metric.len())
        .map(|node| {
            let m = ii.ii[node].len();
            if !metric.regular[node] {
                return DVector::zeros(m);
            }
            let gi = metric.g_inv[node].as_matrix();
            let raised = gi * a.components[node].as_matrix() * gi;
            DVector::from_iterator(m, ii.ii[node].iter().map(|f| raised.component_mul(f.as_matrix()).sum()))
        })
        .collect();
    NormalField { components }
}

/// `|A(ν)|_g` with `(A(ν))^j = g^{jl} A_lk ν^k`.
pub fn conormal_flux_norm(a: &TensorField, sample: &BoundarySample, metric: &MetricData) -> f64 {
    flux_norm(&a.components[sample.node], &metric.g_inv[sample.node], &sample.conormal)
}

pub fn flux_norm(a: &SymMatrix, g_inv: &SymMatrix, conormal: &[f64]) -> f64 {
    let nu = DVector::from_column_slice(conormal);
    let low = a.as_matrix() * nu;
    (low.transpose() * g_inv.as_matrix() * &low)[(0, 0)].max(0.0).sqrt()
}

/// Tangent vector `A(ν)` pushed to the ambient space: `J g^{-1} A ν`.
pub fn flux_vector(a: &SymMatrix, metric: &MetricData, sample: &BoundarySample) -> DVector<f64> {
    let nu = DVector::from_column_slice(&sample.conormal);
    &metric.jets[sample.node].d1 * (metric.g_inv[sample.node].as_matrix() * a.as_matrix() * nu)
}

/// `det(g^{-1} A)` per node (zero at non-regular nodes).
pub fn tensor_det(a: &TensorField, metric: &MetricData) -> Vec<f64> {
    (0..metric.len())
        .map(|k| {
            if metric.regular[k] {
                linalg::det(&a.components[k]) / linalg::det(&metric.g[k])
            } else {
                0.0
            }
        })
        .collect()
}

/// Node-wise cofactor tensor, returned as a tabulated field.
pub fn cofactor_tensor(s: &TensorField, surface: &Surface) -> Result<TensorField> {
    let metric = &surface.metric;
    let n = s.dim();
    let comps = (0..metric.len())
        .map(|k| {
            if metric.regular[k] {
                cofactor_at(&s.components[k], &metric.g[k])
            } else {
                Ok(SymMatrix::zeros(n))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    TensorField::tabulated(comps, surface)
}

/// `λ = (L / (n R))^{n-1}`: the factor making `λA` satisfy
/// `L(λA) = n R(λA)`, where `L` is linear and `R` scales as `λ^{n/(n-1)}`.
pub fn normalization_factor(n: usize, lhs: f64, rhs_integral: f64) -> Result<f64> {
    if !(lhs > 0.0 && lhs.is_finite()) {
        return Err(Error::NonPositiveFunctional(format!("left-hand side {lhs}")));
    }
    if !(rhs_integral > 0.0 && rhs_integral.is_finite()) {
        return Err(Error::NonPositiveFunctional(format!("determinant integral {rhs_integral}")));
    }
    Ok((lhs / (n as f64 * rhs_integral)).powi(n as i32 - 1))
}

pub fn normalize_scaling(a: &TensorField, report: &crate::sobolev::SobolevReport) -> Result<(TensorField, f64)> {
    let lambda = normalization_factor(report.n, report.lhs_interior + report.lhs_boundary, report.rhs_integral)?;
    Ok((a.scaled(lambda), lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BaseDomain, ChartSpec};

    fn surface(spec: ChartSpec, res: usize) -> Surface {
        Surface::new(spec.build(res).unwrap()).unwrap()
    }

    fn unit_square(ambient: usize) -> ChartSpec {
        ChartSpec::new(
            BaseDomain::Box {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            ambient,
        )
    }

    #[test]
    fn metric_is_divergence_free() {
        for spec in [
            ChartSpec::new(BaseDomain::Sphere, 3),
            ChartSpec::new(BaseDomain::PolarDisk, 4),
            ChartSpec::new(BaseDomain::Sphere, 3).with_mode(DerivativeMode::Fd2),
        ] {
            let s = surface(spec, 17);
            let a = TensorField::from_spec(TensorSpec::Metric, &s).unwrap();
            let d = divergence(&a, &s.metric);
            assert!(d.norms(&s.metric).iter().all(|&x| x < 1e-8));
        }
    }

    #[test]
    fn linear_conformal_factor_on_square() {
        let s = surface(unit_square(3), 9);
        let f = Polynomial::constant(1.0).plus(&Polynomial::variable(0));
        let a = TensorField::from_spec(TensorSpec::Conformal { f }, &s).unwrap();
        let d = divergence(&a, &s.metric);
        for c in &d.components {
            assert!((c[0] - 1.0).abs() < 1e-14 && c[1].abs() < 1e-14);
        }
    }

    #[test]
    fn sphere_mean_curvature_contraction() {
        let s = surface(ChartSpec::new(BaseDomain::Sphere, 3), 17);
        let a = TensorField::from_spec(TensorSpec::Metric, &s).unwrap();
        let h = contract_with_second_form(&a, &s.ii, &s.metric);
        for (k, v) in h.norms().iter().enumerate() {
            if s.metric.regular[k] {
                assert!((v - 2.0).abs() < 1e-12);
            }
        }
        let two = TensorField::from_spec(
            TensorSpec::Scaled {
                factor: 2.0,
                inner: Box::new(TensorSpec::Metric),
            },
            &s,
        )
        .unwrap();
        let det = tensor_det(&two, &s.metric);
        assert!((det[s.chart.grid().flat(&[5, 5])] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn flux_of_anisotropic_field() {
        let s = surface(unit_square(4), 5);
        let entries = vec![Polynomial::constant(4.0), Polynomial::constant(1.0)];
        let a = TensorField::from_spec(TensorSpec::ChartDiagonal { entries }, &s).unwrap();
        let b = s.boundary.iter().find(|b| b.axis == 0 && b.side == 1).unwrap();
        assert!((conormal_flux_norm(&a, b, &s.metric) - 4.0).abs() < 1e-14);
        let det = tensor_det(&a, &s.metric);
        assert!(det.iter().all(|&d| (d - 4.0).abs() < 1e-14));
    }

    #[test]
    fn cofactor_of_simple_fields() {
        let s = surface(unit_square(3), 5);
        let entries = vec![Polynomial::constant(2.0), Polynomial::constant(3.0)];
        let a = TensorField::from_spec(TensorSpec::ChartDiagonal { entries }, &s).unwrap();
        let t = cofactor_tensor(&a, &s).unwrap();
        assert!(t.components.iter().all(|m| *m == SymMatrix::from_diagonal(&[3.0, 2.0])));
        let g = TensorField::from_spec(TensorSpec::Metric, &s).unwrap();
        let t = cofactor_tensor(&g, &s).unwrap();
        assert!(t.components.iter().all(|m| *m == SymMatrix::identity(2)));
    }

    #[test]
    fn rejects_indefinite_field() {
        let s = surface(unit_square(3), 5);
        let entries = vec![Polynomial::constant(1.0), Polynomial::constant(-1.0)];
        assert!(matches!(
            TensorField::from_spec(TensorSpec::ChartDiagonal { entries }, &s),
            Err(Error::NotUniformlyPositive { .. })
        ));
    }

    #[test]
    fn normalization_factor_examples() {
        // n = 2: L = 2 n R means λ = 2; doubling A halves it back
        assert!((normalization_factor(2, 4.0, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(normalization_factor(2, 0.0, 1.0).is_err());
    }
}
