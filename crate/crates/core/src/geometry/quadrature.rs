use super::chart::{Chart, DerivativeMode};
use super::grid::Axis;
use super::metric::MetricData;

/// One-dimensional composite weights along an axis. Periodic axes use the
/// (spectrally accurate) rectangle rule with zero weight on the duplicate
/// node; bounded axes use trapezoid or Simpson according to the mode.
pub fn axis_weights(axis: &Axis, mode: DerivativeMode) -> Vec<f64> {
    let p = axis.points;
    let h = axis.spacing();
    if axis.is_periodic() {
        let mut w = vec![h; p];
        w[p - 1] = 0.0;
        return w;
    }
    match mode {
        DerivativeMode::Fd4 if p % 2 == 1 => (0..p)
            .map(|i| {
                let c = if i == 0 || i + 1 == p {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                c * h / 3.0
            })
            .collect(),
        _ => (0..p)
            .map(|i| if i == 0 || i + 1 == p { 0.5 * h } else { h })
            .collect(),
    }
}

/// Product of the 1D weights at a node, without the volume density.
pub fn parameter_weights(chart: &Chart) -> Vec<f64> {
    let grid = chart.grid();
    let per_axis: Vec<Vec<f64>> = grid
        .axes()
        .iter()
        .map(|a| axis_weights(a, chart.mode()))
        .collect();
    (0..grid.len())
        .map(|k| {
            grid.index(k)
                .iter()
                .zip(&per_axis)
                .map(|(&i, w)| w[i])
                .product()
        })
        .collect()
}

/// Quadrature weights including `sqrt(det g)`.
pub fn node_weights(chart: &Chart, metric: &MetricData) -> Vec<f64> {
    parameter_weights(chart)
        .into_iter()
        .zip(&metric.sqrt_det_g)
        .map(|(w, s)| w * s)
        .collect()
}

pub fn integrate(chart: &Chart, metric: &MetricData, field: &[f64]) -> f64 {
    node_weights(chart, metric)
        .iter()
        .zip(field)
        .filter(|(w, _)| **w != 0.0)
        .map(|(w, f)| w * f)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{induced_metric, BaseDomain, ChartSpec};
    use std::f64::consts::PI;

    fn area(spec: ChartSpec, res: usize) -> f64 {
        let c = spec.build(res).unwrap();
        let m = induced_metric(&c).unwrap();
        integrate(&c, &m, &vec![1.0; c.grid().len()])
    }

    #[test]
    fn unit_square_area() {
        let sq = ChartSpec::new(
            BaseDomain::Box {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            3,
        );
        assert!((area(sq.clone(), 9) - 1.0).abs() < 1e-12);
        assert!((area(sq.with_mode(DerivativeMode::Fd4), 9) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disk_and_sphere_areas() {
        assert!((area(ChartSpec::new(BaseDomain::PolarDisk, 4), 33) - PI).abs() < 1e-12);
        let errs: Vec<f64> = [17, 33, 65]
            .iter()
            .map(|&r| (area(ChartSpec::new(BaseDomain::Sphere, 3), r) - 4.0 * PI).abs())
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.9);
        }
    }
}
