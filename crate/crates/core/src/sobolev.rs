//! The Sobolev functional: both sides of the inequality, the sharp
//! constants, scenario evaluation with a Richardson error budget, and the
//! equality-case constructors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{lift_codimension, ChartSpec, DerivativeMode, Surface};
use crate::linalg::{self, unit_ball_volume, whiten};
use crate::poly::Polynomial;
use crate::tensorfield::{
    conormal_flux_norm, contract_with_second_form, covariant_hessian_of_ambient, divergence, tensor_det,
    TensorField, TensorSpec,
};

/// Flatness threshold for the equality-case constructor.
pub const FLAT_TOLERANCE: f64 = 1e-8;

/// `n [(n+m)|B^{n+m}| / (m |B^m|)]^{1/n}` for `n >= 2`, `m >= 2`.
pub fn michael_simon_constant(n: usize, m: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidConstant {
            n,
            m,
            reason: "intrinsic dimension must be at least 2".into(),
        });
    }
    if m < 2 {
        return Err(Error::InvalidConstant {
            n,
            m,
            reason: "codimension must be at least 2; lift codimension-one charts first".into(),
        });
    }
    let (nf, mf) = (n as f64, m as f64);
    let q = (nf + mf) * unit_ball_volume(n + m) / (mf * unit_ball_volume(m));
    Ok(nf * q.powf(1.0 / nf))
}

/// Strict superadditivity of `t ↦ t^{(n-1)/n}` with margin `1e-12`.
pub fn superadditivity_check(a: f64, b: f64, n: usize) -> bool {
    let e = (n as f64 - 1.0) / n as f64;
    a.powf(e) + b.powf(e) - (a + b).powf(e) > 1e-12
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    /// Any codimension `m >= 2` with the general constant.
    General,
    /// Codimension exactly 2 (sharp constant `n|B^n|^{1/n}`).
    Codim2,
    /// Codimension 1, evaluated after lifting into one more dimension.
    Codim1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub chart: ChartSpec,
    pub tensor: TensorSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub selector: Selector,
    /// Connected pieces; functionals are summed across them.
    pub components: Vec<Component>,
    #[serde(default = "default_resolutions")]
    pub resolutions: Vec<usize>,
}

fn default_resolutions() -> Vec<usize> {
    vec![33, 65]
}

impl Scenario {
    pub fn single(name: &str, selector: Selector, chart: ChartSpec, tensor: TensorSpec) -> Self {
        Scenario {
            name: name.into(),
            description: String::new(),
            selector,
            components: vec![Component { chart, tensor }],
            resolutions: default_resolutions(),
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.components[0].chart.domain.intrinsic_dim()
    }

    /// Codimension of the charts as given.
    pub fn chart_codim(&self) -> usize {
        self.components[0].chart.codimension()
    }

    /// Codimension used for the constant (after any lift).
    pub fn effective_codim(&self) -> usize {
        match self.selector {
            Selector::Codim1 => self.chart_codim() + 1,
            _ => self.chart_codim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(format!("{}: {msg}", self.name)));
        if self.components.is_empty() {
            return bad("no components".into());
        }
        let n = self.intrinsic_dim();
        let m = self.chart_codim();
        if n < 2 {
            return Err(Error::UnsupportedDimension(n));
        }
        for c in &self.components {
            if c.chart.domain.intrinsic_dim() != n || c.chart.codimension() != m {
                return bad("components differ in dimension or codimension".into());
            }
        }
        match (self.selector, m) {
            (Selector::Codim2, 2) | (Selector::Codim1, 1) => {}
            (Selector::General, m) if m >= 2 => {}
            (s, m) => return bad(format!("selector {s:?} is inconsistent with codimension {m}")),
        }
        if self.resolutions.is_empty() || self.resolutions.windows(2).any(|w| w[0] >= w[1]) {
            return bad("resolutions must be non-empty and strictly increasing".into());
        }
        if self.resolutions[0] < 3 {
            return bad("resolution below 3".into());
        }
        Ok(())
    }

    pub fn constant(&self) -> Result<f64> {
        michael_simon_constant(self.intrinsic_dim(), self.effective_codim())
    }

    /// Charts and tensor fields at one resolution, lifted when required.
    pub fn discretize(&self, resolution: usize) -> Result<Vec<(Surface, TensorField)>> {
        self.validate()?;
        self.components
            .iter()
            .map(|c| {
                let mut chart = c.chart.build(resolution)?;
                if self.selector == Selector::Codim1 {
                    chart = lift_codimension(&chart);
                }
                let surface = Surface::new(chart)?;
                let field = TensorField::from_spec(c.tensor.clone(), &surface)?;
                Ok((surface, field))
            })
            .collect()
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        self.components[0].chart.derivative_mode
    }

    /// Whether `(resolution + 1) / 2` is itself a valid resolution.
    pub fn coarse_resolution(&self, resolution: usize) -> Option<usize> {
        let c = (resolution + 1) / 2;
        let ok = resolution % 2 == 1
            && c >= 3
            && (self.derivative_mode() != DerivativeMode::Fd4 || (c >= 7 && c % 2 == 1));
        ok.then_some(c)
    }
}

/// Node-level ingredients of the functional on one component.
#[derive(Clone, Debug)]
pub struct Integrands {
    /// `sqrt(|div A|^2 + |⟨A, II⟩|^2)` per node.
    pub interior: Vec<f64>,
    /// `det(g^{-1}A)^{1/(n-1)}` per node.
    pub det_power: Vec<f64>,
    /// `|A(ν)|` per boundary sample.
    pub flux: Vec<f64>,
}

pub fn integrands(surface: &Surface, field: &TensorField) -> Integrands {
    let metric = &surface.metric;
    let n = surface.dim();
    let div = divergence(field, metric).norms(metric);
    let h = contract_with_second_form(field, &surface.ii, metric).norms();
    let mut interior: Vec<f64> = div.iter().zip(&h).map(|(d, h)| d.hypot(*h)).collect();
    let mut det_power: Vec<f64> = tensor_det(field, metric)
        .into_iter()
        .map(|d| d.max(0.0).powf(1.0 / (n as f64 - 1.0)))
        .collect();
    // pole nodes carry no quadrature weight; give them ring averages so
    // interpolated fields stay smooth there
    let grid = surface.chart.grid();
    for k in 0..surface.len() {
        if !metric.regular[k] {
            let ring = grid.pole_ring(k);
            let avg = |v: &[f64]| ring.iter().map(|&i| v[i]).sum::<f64>() / ring.len() as f64;
            interior[k] = avg(&interior);
            det_power[k] = avg(&det_power);
        }
    }
    let flux = surface
        .boundary
        .iter()
        .map(|b| conormal_flux_norm(field, b, metric))
        .collect();
    Integrands {
        interior,
        det_power,
        flux,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Functionals {
    pub lhs_interior: f64,
    pub lhs_boundary: f64,
    pub rhs_integral: f64,
}

impl Functionals {
    pub fn of(surface: &Surface, field: &TensorField) -> Self {
        let t = integrands(surface, field);
        Functionals {
            lhs_interior: surface.integrate(&t.interior),
            lhs_boundary: surface.boundary.iter().zip(&t.flux).map(|(b, f)| b.weight * f).sum(),
            rhs_integral: surface.integrate(&t.det_power),
        }
    }

    pub fn sum(parts: impl IntoIterator<Item = Functionals>) -> Self {
        parts.into_iter().fold(Functionals::default(), |a, b| Functionals {
            lhs_interior: a.lhs_interior + b.lhs_interior,
            lhs_boundary: a.lhs_boundary + b.lhs_boundary,
            rhs_integral: a.rhs_integral + b.rhs_integral,
        })
    }

    pub fn lhs(&self) -> f64 {
        self.lhs_interior + self.lhs_boundary
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevReport {
    pub scenario: String,
    pub n: usize,
    pub m: usize,
    pub resolution: usize,
    pub lhs_interior: f64,
    pub lhs_boundary: f64,
    pub rhs_integral: f64,
    pub constant: f64,
    pub ratio: f64,
    /// Richardson estimate of the discretization error in `ratio`.
    pub eps_mesh: Option<f64>,
}

impl SobolevReport {
    pub fn from_functionals(name: &str, n: usize, m: usize, resolution: usize, f: Functionals, constant: f64) -> Result<Self> {
        if !(f.rhs_integral > 0.0) || !f.lhs().is_finite() {
            return Err(Error::NonPositiveFunctional(format!(
                "lhs {} rhs {}",
                f.lhs(),
                f.rhs_integral
            )));
        }
        let ratio = f.lhs() / (constant * f.rhs_integral.powf((n as f64 - 1.0) / n as f64));
        Ok(SobolevReport {
            scenario: name.into(),
            n,
            m,
            resolution,
            lhs_interior: f.lhs_interior,
            lhs_boundary: f.lhs_boundary,
            rhs_integral: f.rhs_integral,
            constant,
            ratio,
            eps_mesh: None,
        })
    }
}

/// Evaluates the functional on already discretized components.
pub fn report_for(scenario: &Scenario, resolution: usize, parts: &[(Surface, TensorField)]) -> Result<SobolevReport> {
    let f = Functionals::sum(parts.iter().map(|(s, a)| Functionals::of(s, a)));
    SobolevReport::from_functionals(
        &scenario.name,
        scenario.intrinsic_dim(),
        scenario.effective_codim(),
        resolution,
        f,
        scenario.constant()?,
    )
}

/// The functional at one resolution, without an error estimate.
pub fn evaluate_at(scenario: &Scenario, resolution: usize) -> Result<SobolevReport> {
    let parts = scenario.discretize(resolution)?;
    report_for(scenario, resolution, &parts)
}

/// Convergence order of the ratio for a derivative mode.
pub fn quadrature_order(mode: DerivativeMode) -> i32 {
    match mode {
        DerivativeMode::Exact | DerivativeMode::Fd2 => 2,
        DerivativeMode::Fd4 => 4,
    }
}

/// Richardson error estimate from two nested resolutions, floored at
/// round-off level.
pub fn richardson_eps(fine: f64, coarse: f64, order: i32) -> f64 {
    let est = (fine - coarse).abs() / (2f64.powi(order) - 1.0);
    est.max(64.0 * f64::EPSILON * fine.abs())
}

/// Evaluates at `resolution` and attaches `eps_mesh` from the nested
/// coarse grid `(resolution + 1) / 2` when it exists.
pub fn evaluate_inequality(scenario: &Scenario, resolution: usize) -> Result<SobolevReport> {
    let mut fine = evaluate_at(scenario, resolution)?;
    if let Some(c) = scenario.coarse_resolution(resolution) {
        let coarse = evaluate_at(scenario, c)?;
        fine.eps_mesh = Some(richardson_eps(
            fine.ratio,
            coarse.ratio,
            quadrature_order(scenario.derivative_mode()),
        ));
    }
    Ok(fine)
}

/// Ratios over a refinement sequence with observed convergence orders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub scenario: String,
    pub resolutions: Vec<usize>,
    pub ratios: Vec<f64>,
    /// `|r_{i+1} − r_i|`.
    pub differences: Vec<f64>,
    /// `log(d_i / d_{i+1}) / log(h_i / h_{i+1})` wherever both differences
    /// are above round-off.
    pub slopes: Vec<f64>,
    /// Every difference is at round-off level: the discretization
    /// reproduces the ratio exactly and no order is observable.
    pub exact: bool,
    pub reports: Vec<SobolevReport>,
}

/// Differences below this multiple of `|r|` count as round-off.
pub const ROUNDOFF_LEVEL: f64 = 1e-12;

impl ConvergenceStudy {
    /// The finest observed order.
    pub fn slope(&self) -> Option<f64> {
        self.slopes.last().copied()
    }

    pub fn passes(&self, min_slope: f64) -> bool {
        self.exact || self.slope().is_some_and(|s| s >= min_slope)
    }
}

/// Needs at least three strictly increasing resolutions; `eps_mesh` of
/// each report after the first comes from its predecessor.
pub fn convergence_study(scenario: &Scenario, resolutions: &[usize]) -> Result<ConvergenceStudy> {
    if resolutions.len() < 3 || resolutions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidScenario(format!(
            "{}: a convergence study needs >= 3 strictly increasing resolutions, got {resolutions:?}",
            scenario.name
        )));
    }
    let order = quadrature_order(scenario.derivative_mode());
    let mut reports = Vec::with_capacity(resolutions.len());
    for &res in resolutions {
        let mut r = evaluate_at(scenario, res)?;
        if let Some(prev) = reports.last() {
            let prev: &SobolevReport = prev;
            r.eps_mesh = Some(richardson_eps(r.ratio, prev.ratio, order));
        }
        reports.push(r);
    }
    let ratios: Vec<f64> = reports.iter().map(|r| r.ratio).collect();
    let differences: Vec<f64> = ratios.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let floor = |i: usize| ROUNDOFF_LEVEL * ratios[i + 1].abs().max(1.0);
    let spacing = |res: usize| 1.0 / (res - 1) as f64;
    let slopes = (0..differences.len().saturating_sub(1))
        .filter(|&i| differences[i] > floor(i) && differences[i + 1] > floor(i + 1))
        .map(|i| {
            let h_ratio = spacing(resolutions[i + 1]) / spacing(resolutions[i + 2]);
            (differences[i] / differences[i + 1]).ln() / h_ratio.ln()
        })
        .collect();
    Ok(ConvergenceStudy {
        scenario: scenario.name.clone(),
        resolutions: resolutions.to_vec(),
        exact: (0..differences.len()).all(|i| differences[i] <= floor(i)),
        ratios,
        differences,
        slopes,
        reports,
    })
}

pub fn equality_gap(report: &SobolevReport) -> f64 {
    report.ratio - 1.0
}

/// `A = cof D²u` for a convex ambient potential `u` on a flat chart.
pub fn cofactor_field_from_convex_potential(u: &Polynomial, surface: &Surface) -> Result<TensorField> {
    let metric = &surface.metric;
    let sup_ii = surface
        .ii
        .ii
        .iter()
        .zip(&metric.regular)
        .filter(|(_, r)| **r)
        .flat_map(|(forms, _)| forms.iter().map(|f| f.max_abs()))
        .fold(0.0, f64::max);
    if sup_ii > FLAT_TOLERANCE {
        return Err(Error::CurvedChart { sup_ii });
    }
    for k in 0..surface.len() {
        if !metric.regular[k] {
            continue;
        }
        let s = covariant_hessian_of_ambient(u, &metric.jets[k]).expect("regular node");
        let ev = whiten(&s, &metric.g[k]).map_or(f64::NAN, |w| linalg::min_eigenvalue(&w));
        if !(ev >= linalg::PSD_TOLERANCE) {
            return Err(Error::NonConvexPotential {
                node: k,
                min_eigenvalue: ev,
            });
        }
    }
    TensorField::from_spec(TensorSpec::CofactorOfPotential { u: u.clone() }, surface)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BaseDomain;
    use std::f64::consts::PI;

    #[test]
    fn constants() {
        assert!((michael_simon_constant(2, 2).unwrap() - 2.0 * PI.sqrt()).abs() < 1e-12);
        let c3 = 3.0 * (4.0 * PI / 3.0).powf(1.0 / 3.0);
        assert!((michael_simon_constant(3, 2).unwrap() - c3).abs() < 1e-12);
        // |B^5| = 8π²/15, |B^3| = 4π/3
        let c23 = 2.0 * ((5.0 * 8.0 * PI * PI / 15.0) / (3.0 * 4.0 * PI / 3.0)).sqrt();
        assert!((michael_simon_constant(2, 3).unwrap() - c23).abs() < 1e-12);
        assert!(michael_simon_constant(2, 1).is_err());
        assert!(michael_simon_constant(1, 2).is_err());
    }

    #[test]
    fn superadditivity() {
        assert!(superadditivity_check(1.0, 1.0, 2));
        assert!(superadditivity_check(PI, PI, 2));
        assert!(superadditivity_check(1e-8, 1.0, 3));
    }

    #[test]
    fn flat_disk_equality() {
        let s = Scenario::single(
            "disk",
            Selector::Codim2,
            ChartSpec::new(BaseDomain::PolarDisk, 4),
            TensorSpec::Metric,
        );
        let r = evaluate_inequality(&s, 33).unwrap();
        assert!(r.lhs_interior.abs() < 1e-12);
        assert!((r.lhs_boundary - 2.0 * PI).abs() < 1e-12);
        assert!((r.rhs_integral - PI).abs() < 1e-12);
        assert!((r.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn selector_mismatch_is_rejected() {
        let s = Scenario::single(
            "bad",
            Selector::Codim2,
            ChartSpec::new(BaseDomain::Sphere, 3),
            TensorSpec::Metric,
        );
        assert!(matches!(s.validate(), Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn convex_potential_cofactor_is_divergence_free() {
        let surface = Surface::new(ChartSpec::new(BaseDomain::PolarDisk, 4).build(33).unwrap()).unwrap();
        let u = Polynomial::half_norm_squared(2).plus(&Polynomial::monomial(0.1, &[3]));
        let a = cofactor_field_from_convex_potential(&u, &surface).unwrap();
        let d = divergence(&a, &surface.metric).norms(&surface.metric);
        assert!(d.iter().fold(0.0_f64, |m, &x| m.max(x)) < 1e-6);

        let curved = Surface::new(ChartSpec::new(BaseDomain::Sphere, 4).build(9).unwrap()).unwrap();
        assert!(matches!(
            cofactor_field_from_convex_potential(&Polynomial::half_norm_squared(3), &curved),
            Err(Error::CurvedChart { .. })
        ));
        let saddle = Polynomial::monomial(1.0, &[1, 1]);
        assert!(matches!(
            cofactor_field_from_convex_potential(&saddle, &surface),
            Err(Error::NonConvexPotential { .. })
        ));
    }
}
