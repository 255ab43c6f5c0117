use crate::error::{Error, Result};
use crate::geometry::Surface;
use crate::sobolev::{integrands, Functionals, Integrands, Scenario};
use crate::tensorfield::{normalization_factor, TensorField};

/// Relative tolerance for the discrete compatibility `∫ s = ∮ b`.
pub const COMPATIBILITY_TOLERANCE: f64 = 1e-8;

/// The Neumann problem `div(A ∇u) = s`, `⟨A ∇u, ν⟩ = b` for the
/// normalized field.
#[derive(Clone, Debug)]
pub struct AbpProblem {
    pub surface: Surface,
    /// Normalized field `λ A`.
    pub field: TensorField,
    pub lambda: f64,
    /// `s = n det(A)^{1/(n-1)} − sqrt(|div A|² + |⟨A, II⟩|²)` per node.
    pub source: Vec<f64>,
    /// `b = |A(ν)|` per boundary sample.
    pub flux: Vec<f64>,
    pub integrands: Integrands,
    pub interior_total: f64,
    pub boundary_total: f64,
}

impl AbpProblem {
    pub fn new(surface: Surface, field: TensorField) -> Result<Self> {
        let n = surface.dim();
        let f = Functionals::of(&surface, &field);
        let lambda = normalization_factor(n, f.lhs(), f.rhs_integral)?;
        let field = field.scaled(lambda);
        let t = integrands(&surface, &field);
        let source: Vec<f64> = t
            .det_power
            .iter()
            .zip(&t.interior)
            .map(|(d, l)| n as f64 * d - l)
            .collect();
        let flux = t.flux.clone();
        let interior_total = surface.integrate(&source);
        let boundary_total: f64 = surface.boundary.iter().zip(&flux).map(|(b, v)| b.weight * v).sum();
        Ok(AbpProblem {
            surface,
            field,
            lambda,
            source,
            flux,
            integrands: t,
            interior_total,
            boundary_total,
        })
    }

    /// Builds the problem for a connected (single-component) scenario.
    pub fn from_scenario(scenario: &Scenario, resolution: usize) -> Result<Self> {
        let mut parts = scenario.discretize(resolution)?;
        if parts.len() != 1 {
            return Err(Error::InvalidScenario(format!(
                "{}: the Neumann solve needs a connected surface, got {} components",
                scenario.name,
                parts.len()
            )));
        }
        let (surface, field) = parts.pop().expect("one component");
        Self::new(surface, field)
    }

    pub fn dim(&self) -> usize {
        self.surface.dim()
    }

    pub fn codim(&self) -> usize {
        self.surface.codim()
    }

    /// `∫ det(A)^{1/(n-1)}` of the normalized field.
    pub fn det_integral(&self) -> f64 {
        self.surface.integrate(&self.integrands.det_power)
    }

    /// `|∫ s − ∮ b|` relative to `n ∫ det(A)^{1/(n-1)}`.
    pub fn compatibility_residual(&self) -> f64 {
        (self.interior_total - self.boundary_total).abs() / (self.dim() as f64 * self.det_integral())
    }

    pub fn check_compatibility(&self) -> Result<()> {
        if self.compatibility_residual() > COMPATIBILITY_TOLERANCE {
            return Err(Error::Incompatible {
                interior: self.interior_total,
                boundary: self.boundary_total,
            });
        }
        Ok(())
    }
}
