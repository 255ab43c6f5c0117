//! Tensor-product parameter grids with boundary, periodic and pole axes.

use serde::{Deserialize, Serialize};

use crate::stencil;

/// What happens at one end of a bounded parameter axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisEnd {
    /// The face is part of the manifold boundary.
    Boundary,
    /// The whole face collapses to a single point (polar origin, sphere poles).
    Pole,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AxisKind {
    Bounded { lo: AxisEnd, hi: AxisEnd },
    /// The last node duplicates the first.
    Periodic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub kind: AxisKind,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    fn period_nodes(&self) -> usize {
        self.points - 1
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self.kind, AxisKind::Periodic)
    }

    pub fn lo_end(&self) -> Option<AxisEnd> {
        match self.kind {
            AxisKind::Bounded { lo, .. } => Some(lo),
            AxisKind::Periodic => None,
        }
    }

    pub fn hi_end(&self) -> Option<AxisEnd> {
        match self.kind {
            AxisKind::Bounded { hi, .. } => Some(hi),
            AxisKind::Periodic => None,
        }
    }
}

/// Flat node ordering: axis 0 varies fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
    strides: Vec<usize>,
    len: usize,
}

const FAR: usize = usize::MAX / 8;

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Self {
        let mut strides = Vec::with_capacity(axes.len());
        let mut len = 1;
        for a in &axes {
            strides.push(len);
            len *= a.points;
        }
        Grid { axes, strides, len }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, d: usize) -> &Axis {
        &self.axes[d]
    }

    pub fn spacing(&self, d: usize) -> f64 {
        self.axes[d].spacing()
    }

    pub fn index(&self, flat: usize) -> Vec<usize> {
        self.axes
            .iter()
            .zip(&self.strides)
            .map(|(a, s)| (flat / s) % a.points)
            .collect()
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn index_along(&self, flat: usize, d: usize) -> usize {
        (flat / self.strides[d]) % self.axes[d].points
    }

    pub fn params(&self, flat: usize) -> Vec<f64> {
        self.index(flat)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.coord(i))
            .collect()
    }

    /// Move `k` steps along axis `d`, wrapping on periodic axes.
    pub fn step(&self, flat: usize, d: usize, k: isize) -> Option<usize> {
        let a = &self.axes[d];
        let i = self.index_along(flat, d) as isize;
        let j = i + k;
        let j = if a.is_periodic() {
            j.rem_euclid(a.period_nodes() as isize)
        } else if j < 0 || j >= a.points as isize {
            return None;
        } else {
            j
        };
        Some((flat as isize + (j - i) * self.strides[d] as isize) as usize)
    }

    /// Whether the node lies on a collapsed (pole) face.
    pub fn is_pole(&self, flat: usize) -> bool {
        self.axes.iter().enumerate().any(|(d, a)| {
            let i = self.index_along(flat, d);
            (i == 0 && a.lo_end() == Some(AxisEnd::Pole))
                || (i + 1 == a.points && a.hi_end() == Some(AxisEnd::Pole))
        })
    }

    /// Boundary faces the node lies on, as `(axis, side)` with side `-1`/`+1`.
    pub fn boundary_faces(&self, flat: usize) -> Vec<(usize, i8)> {
        let mut out = Vec::new();
        for (d, a) in self.axes.iter().enumerate() {
            let i = self.index_along(flat, d);
            if i == 0 && a.lo_end() == Some(AxisEnd::Boundary) {
                out.push((d, -1));
            }
            if i + 1 == a.points && a.hi_end() == Some(AxisEnd::Boundary) {
                out.push((d, 1));
            }
        }
        out
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        !self.boundary_faces(flat).is_empty()
    }

    pub fn has_boundary(&self) -> bool {
        self.axes.iter().any(|a| {
            a.lo_end() == Some(AxisEnd::Boundary) || a.hi_end() == Some(AxisEnd::Boundary)
        })
    }

    /// True for the trailing duplicate node of a periodic axis.
    pub fn is_periodic_duplicate(&self, flat: usize) -> bool {
        self.axes
            .iter()
            .enumerate()
            .any(|(d, a)| a.is_periodic() && self.index_along(flat, d) + 1 == a.points)
    }

    /// Representative node after periodic identification and pole collapse.
    pub fn canonical(&self, flat: usize) -> usize {
        let mut idx = self.index(flat);
        loop {
            let before = idx.clone();
            for (d, a) in self.axes.iter().enumerate() {
                if a.is_periodic() && idx[d] + 1 == a.points {
                    idx[d] = 0;
                }
                let at_pole = (idx[d] == 0 && a.lo_end() == Some(AxisEnd::Pole))
                    || (idx[d] + 1 == a.points && a.hi_end() == Some(AxisEnd::Pole));
                if at_pole {
                    for (e, v) in idx.iter_mut().enumerate() {
                        if e != d {
                            *v = 0;
                        }
                    }
                }
            }
            if idx == before {
                break;
            }
        }
        self.flat(&idx)
    }

    /// Nodes of the first ring next to the pole face containing `flat`
    /// (periodic duplicates excluded). Empty for non-pole nodes.
    pub fn pole_ring(&self, flat: usize) -> Vec<usize> {
        for (d, a) in self.axes.iter().enumerate() {
            let i = self.index_along(flat, d);
            let ring = if i == 0 && a.lo_end() == Some(AxisEnd::Pole) {
                1
            } else if i + 1 == a.points && a.hi_end() == Some(AxisEnd::Pole) {
                a.points - 2
            } else {
                continue;
            };
            return (0..self.len)
                .filter(|&k| self.index_along(k, d) == ring && !self.is_periodic_duplicate(k))
                .collect();
        }
        Vec::new()
    }

    fn gaps(&self, flat: usize, d: usize, avoid_poles: bool) -> (usize, usize) {
        let a = &self.axes[d];
        if a.is_periodic() {
            return (FAR, FAR);
        }
        let i = self.index_along(flat, d);
        let mut lo = i;
        let mut hi = a.points - 1 - i;
        if avoid_poles {
            if a.lo_end() == Some(AxisEnd::Pole) {
                lo = lo.saturating_sub(1);
            }
            if a.hi_end() == Some(AxisEnd::Pole) {
                hi = hi.saturating_sub(1);
            }
        }
        (lo, hi)
    }

    /// Finite-difference weights `(node, weight)` for `d^deriv/dx_d^deriv`
    /// at a node, already scaled by the step. One-sided near boundary ends.
    pub fn fd_weights(
        &self,
        flat: usize,
        d: usize,
        deriv: usize,
        order: usize,
        avoid_poles: bool,
    ) -> Option<Vec<(usize, f64)>> {
        let (lo, hi) = self.gaps(flat, d, avoid_poles);
        let st = stencil::stencil(lo, hi, deriv, order)?;
        let h = self.spacing(d).powi(deriv as i32);
        st.into_iter()
            .filter(|&(_, w)| w != 0.0)
            .map(|(o, w)| self.step(flat, d, o).map(|k| (k, w / h)))
            .collect()
    }

    /// Weights for the mixed derivative `d^2/dx_a dx_b` (`a != b`) or the
    /// pure second derivative when `a == b`.
    pub fn fd_weights_second(
        &self,
        flat: usize,
        a: usize,
        b: usize,
        order: usize,
        avoid_poles: bool,
    ) -> Option<Vec<(usize, f64)>> {
        if a == b {
            return self.fd_weights(flat, a, 2, order, avoid_poles);
        }
        let outer = self.fd_weights(flat, a, 1, order, avoid_poles)?;
        let mut acc: Vec<(usize, f64)> = Vec::new();
        for (k, wa) in outer {
            for (l, wb) in self.fd_weights(k, b, 1, order, avoid_poles)? {
                acc.push((l, wa * wb));
            }
        }
        Some(acc)
    }

    /// Iterator over cells as their lowest-corner node.
    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&k| {
            self.axes
                .iter()
                .enumerate()
                .all(|(d, a)| self.index_along(k, d) + 1 < a.points)
        })
    }

    /// Corner nodes of the cell with lowest corner `base`, in binary order
    /// (bit `d` set means +1 along axis `d`).
    pub fn cell_corners(&self, base: usize) -> Vec<usize> {
        let n = self.dim();
        (0..(1usize << n))
            .map(|mask| {
                (0..n)
                    .filter(|d| mask & (1 << d) != 0)
                    .map(|d| self.strides[d])
                    .sum::<usize>()
                    + base
            })
            .collect()
    }

    /// Wrap periodic coordinates and clamp bounded ones into the box.
    pub fn normalize_params(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .zip(&self.axes)
            .map(|(&x, a)| {
                if a.is_periodic() {
                    let per = a.hi - a.lo;
                    a.lo + (x - a.lo).rem_euclid(per)
                } else {
                    x.clamp(a.lo, a.hi)
                }
            })
            .collect()
    }

    /// Continues a parameter point across pole faces: past a pole the
    /// bounded coordinate is mirrored and the first periodic axis turns by
    /// half a period (polar and spherical charts).
    pub fn reflect_through_poles(&self, p: &[f64]) -> Vec<f64> {
        let mut q = p.to_vec();
        let turn = self.axes.iter().position(|a| a.is_periodic());
        for (d, a) in self.axes.iter().enumerate() {
            let mut flipped = false;
            if a.lo_end() == Some(AxisEnd::Pole) && q[d] < a.lo {
                q[d] = 2.0 * a.lo - q[d];
                flipped = true;
            } else if a.hi_end() == Some(AxisEnd::Pole) && q[d] > a.hi {
                q[d] = 2.0 * a.hi - q[d];
                flipped = true;
            }
            if let (true, Some(t)) = (flipped, turn) {
                let ax = &self.axes[t];
                q[t] += 0.5 * (ax.hi - ax.lo);
            }
        }
        self.normalize_params(&q)
    }

    /// Multilinear interpolation weights at parameter point `p`.
    pub fn interpolation_weights(&self, p: &[f64]) -> Vec<(usize, f64)> {
        let q = self.normalize_params(p);
        let n = self.dim();
        let mut base = vec![0usize; n];
        let mut t = vec![0.0; n];
        for d in 0..n {
            let a = &self.axes[d];
            let s = (q[d] - a.lo) / a.spacing();
            let i = (s.floor() as isize).clamp(0, a.points as isize - 2) as usize;
            base[d] = i;
            t[d] = (s - i as f64).clamp(0.0, 1.0);
        }
        let b = self.flat(&base);
        self.cell_corners(b)
            .into_iter()
            .enumerate()
            .map(|(mask, node)| {
                let w: f64 = (0..n)
                    .map(|d| if mask & (1 << d) != 0 { t[d] } else { 1.0 - t[d] })
                    .product();
                (node, w)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polar(nr: usize, nt: usize) -> Grid {
        Grid::new(vec![
            Axis {
                lo: 0.0,
                hi: 1.0,
                points: nr,
                kind: AxisKind::Bounded {
                    lo: AxisEnd::Pole,
                    hi: AxisEnd::Boundary,
                },
            },
            Axis {
                lo: 0.0,
                hi: std::f64::consts::TAU,
                points: nt,
                kind: AxisKind::Periodic,
            },
        ])
    }

    #[test]
    fn index_roundtrip_and_steps() {
        let g = polar(5, 9);
        assert_eq!(g.len(), 45);
        for k in 0..g.len() {
            assert_eq!(g.flat(&g.index(k)), k);
        }
        let k = g.flat(&[2, 0]);
        assert_eq!(g.step(k, 1, -1), Some(g.flat(&[2, 7])));
        assert_eq!(g.step(k, 0, 3), None);
    }

    #[test]
    fn canonical_collapses_pole_and_seam() {
        let g = polar(5, 9);
        assert_eq!(g.canonical(g.flat(&[0, 4])), g.flat(&[0, 0]));
        assert_eq!(g.canonical(g.flat(&[3, 8])), g.flat(&[3, 0]));
        assert!(g.is_pole(g.flat(&[0, 3])));
        assert_eq!(g.boundary_faces(g.flat(&[4, 2])), vec![(0, 1)]);
        assert_eq!(g.pole_ring(g.flat(&[0, 3])).len(), 8);
    }

    #[test]
    fn fd_weights_differentiate_polynomials() {
        let g = polar(9, 17);
        let f: Vec<f64> = (0..g.len())
            .map(|k| {
                let p = g.params(k);
                p[0] * p[0] * p[0] + 2.0 * p[0] * p[1].sin()
            })
            .collect();
        // at the outer boundary, one-sided second derivative in r is exact for cubics
        let k = g.flat(&[8, 3]);
        let w = g.fd_weights(k, 0, 2, 2, true).unwrap();
        let d2: f64 = w.iter().map(|&(j, c)| c * f[j]).sum();
        assert!((d2 - 6.0).abs() < 1e-9);
        // next to the pole, avoid_poles keeps the pole row out of the stencil
        let k = g.flat(&[1, 3]);
        let w = g.fd_weights(k, 0, 1, 2, true).unwrap();
        assert!(w.iter().all(|&(j, _)| !g.is_pole(j)));
    }

    #[test]
    fn interpolation_reproduces_bilinear() {
        let g = polar(5, 9);
        let f: Vec<f64> = (0..g.len())
            .map(|k| {
                let p = g.params(k);
                1.0 + p[0] + 0.3 * p[0] * p[1]
            })
            .collect();
        let p = [0.37, 1.1];
        let v: f64 = g.interpolation_weights(&p).iter().map(|&(j, w)| w * f[j]).sum();
        assert!((v - (1.0 + 0.37 + 0.3 * 0.37 * 1.1)).abs() < 1e-12);
    }
}
