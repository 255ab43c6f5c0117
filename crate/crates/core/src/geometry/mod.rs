//! Parametric charts and their first/second-order geometric data.

mod boundary;
mod chart;
mod frame;
mod grid;
mod metric;
mod quadrature;

pub use boundary::{boundary_samples, BoundarySample};
pub use chart::{lift_codimension, BaseDomain, Chart, ChartSpec, DerivativeMode, Jet};
pub use frame::{
    ambient_second_form, normal_frame, normal_projector, normal_projector_at, second_fundamental_form,
    tangent_projector, NormalFrame, SecondFundamentalForm,
};
pub use grid::{Axis, AxisEnd, AxisKind, Grid};
pub use metric::{
    christoffel_from_dg, induced_metric, smallest_singular_value, MetricData, PointGeometry, RANK_TOLERANCE,
};
pub use quadrature::{axis_weights, integrate, node_weights, parameter_weights};

use crate::error::Result;

/// A chart together with every derived per-node field.
#[derive(Clone, Debug)]
pub struct Surface {
    pub chart: Chart,
    pub metric: MetricData,
    pub frame: NormalFrame,
    pub ii: SecondFundamentalForm,
    pub boundary: Vec<BoundarySample>,
    /// Quadrature weights including the volume density.
    pub weights: Vec<f64>,
}

impl Surface {
    pub fn new(chart: Chart) -> Result<Self> {
        let metric = induced_metric(&chart)?;
        let frame = normal_frame(&chart, &metric);
        let ii = second_fundamental_form(&chart, &metric, &frame);
        let boundary = boundary_samples(&chart, &metric);
        let weights = node_weights(&chart, &metric);
        Ok(Surface {
            chart,
            metric,
            frame,
            ii,
            boundary,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.chart.intrinsic_dim()
    }

    pub fn codim(&self) -> usize {
        self.chart.codimension()
    }

    pub fn len(&self) -> usize {
        self.chart.grid().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn integrate(&self, field: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(field)
            .filter(|(w, _)| **w != 0.0)
            .map(|(w, f)| w * f)
            .sum()
    }

    /// Characteristic ambient mesh size: the longest image of a grid step.
    pub fn mesh_size(&self) -> f64 {
        mesh_size(&self.chart, &self.metric)
    }
}

/// `max_{node, a} |∂_a F| Δ_a`.
pub fn mesh_size(chart: &Chart, metric: &MetricData) -> f64 {
    let grid = chart.grid();
    metric
        .jets
        .iter()
        .flat_map(|j| (0..grid.dim()).map(move |a| j.d1.column(a).norm() * grid.spacing(a)))
        .fold(0.0, f64::max)
}
