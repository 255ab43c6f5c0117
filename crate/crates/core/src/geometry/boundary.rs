use nalgebra::DVector;

use super::chart::Chart;
use super::metric::MetricData;
use super::quadrature::axis_weights;

/// A quadrature point on the boundary with its outward unit conormal.
#[derive(Clone, Debug)]
pub struct BoundarySample {
    pub node: usize,
    pub axis: usize,
    /// `-1` for the low face, `+1` for the high face.
    pub side: i8,
    pub point: DVector<f64>,
    /// Chart components `ν^k`.
    pub conormal: Vec<f64>,
    pub conormal_ambient: DVector<f64>,
    pub weight: f64,
}

/// Samples on every boundary face. A node on several faces (box corners)
/// yields one sample per face. Closed charts yield an empty list.
pub fn boundary_samples(chart: &Chart, metric: &MetricData) -> Vec<BoundarySample> {
    let grid = chart.grid();
    let n = grid.dim();
    let per_axis: Vec<Vec<f64>> = grid
        .axes()
        .iter()
        .map(|a| axis_weights(a, chart.mode()))
        .collect();
    let mut out = Vec::new();
    for k in 0..grid.len() {
        if grid.is_periodic_duplicate(k) || !metric.regular[k] {
            continue;
        }
        let idx = grid.index(k);
        for (d, side) in grid.boundary_faces(k) {
            let gi = &metric.g_inv[k];
            let gdd = gi.get(d, d);
            let s = f64::from(side);
            let conormal: Vec<f64> = (0..n).map(|a| s * gi.get(a, d) / gdd.sqrt()).collect();
            let jet = &metric.jets[k];
            let conormal_ambient = &jet.d1 * DVector::from_column_slice(&conormal);
            let face_density = (metric.sqrt_det_g[k].powi(2) * gdd).sqrt();
            let w: f64 = (0..n).filter(|&e| e != d).map(|e| per_axis[e][idx[e]]).product();
            out.push(BoundarySample {
                node: k,
                axis: d,
                side,
                point: jet.x.clone(),
                conormal,
                conormal_ambient,
                weight: w * face_density,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{induced_metric, BaseDomain, ChartSpec};
    use std::f64::consts::PI;

    fn samples(spec: ChartSpec, res: usize) -> Vec<BoundarySample> {
        let c = spec.build(res).unwrap();
        let m = induced_metric(&c).unwrap();
        boundary_samples(&c, &m)
    }

    #[test]
    fn disk_circumference_and_conormal() {
        let s = samples(ChartSpec::new(BaseDomain::PolarDisk, 4), 33);
        let total: f64 = s.iter().map(|b| b.weight).sum();
        assert!((total - 2.0 * PI).abs() < 1e-12);
        for b in &s {
            assert!((b.conormal_ambient.norm() - 1.0).abs() < 1e-12);
            assert!((&b.conormal_ambient - &b.point).norm() < 1e-12);
        }
    }

    #[test]
    fn square_perimeter_and_sphere_empty() {
        let sq = ChartSpec::new(
            BaseDomain::Box {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            4,
        );
        let total: f64 = samples(sq, 9).iter().map(|b| b.weight).sum();
        assert!((total - 4.0).abs() < 1e-12);
        assert!(samples(ChartSpec::new(BaseDomain::Sphere, 3), 9).is_empty());
    }
}
