//! Finite-difference stencils on uniform grids.

/// Fornberg's recursion: weights for derivatives `0..=max_deriv` at 0 from
/// samples at `offsets` (in units of the step). Returns `w[d][j]`.
pub fn fornberg(offsets: &[f64], max_deriv: usize) -> Vec<Vec<f64>> {
    let npts = offsets.len();
    let mut c = vec![vec![0.0; npts]; max_deriv + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    for i in 1..npts {
        let mn = i.min(max_deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Integer offsets of a stencil for derivative `deriv` at accuracy `order`
/// (2 or 4), given how many steps are available below (`lo_gap`) and above
/// (`hi_gap`). Central when possible, otherwise shifted one-sided.
pub fn stencil_offsets(lo_gap: usize, hi_gap: usize, deriv: usize, order: usize) -> Option<Vec<isize>> {
    let w = order / 2;
    if lo_gap >= w && hi_gap >= w {
        return Some((-(w as isize)..=(w as isize)).collect());
    }
    let size = order + deriv;
    if lo_gap + hi_gap + 1 < size {
        return None;
    }
    let start: isize = if lo_gap < w {
        -(lo_gap as isize)
    } else {
        hi_gap as isize - (size as isize - 1)
    };
    Some((start..start + size as isize).collect())
}

/// Weights (per offset) of derivative `deriv` with unit step.
pub fn stencil(lo_gap: usize, hi_gap: usize, deriv: usize, order: usize) -> Option<Vec<(isize, f64)>> {
    let offs = stencil_offsets(lo_gap, hi_gap, deriv, order)?;
    let z: Vec<f64> = offs.iter().map(|&o| o as f64).collect();
    let w = fornberg(&z, deriv);
    Some(offs.into_iter().zip(w[deriv].iter().copied()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_weights() {
        let s = stencil(5, 5, 1, 2).unwrap();
        assert_eq!(s, vec![(-1, -0.5), (0, 0.0), (1, 0.5)]);
        let s = stencil(5, 5, 2, 2).unwrap();
        assert_eq!(s, vec![(-1, 1.0), (0, -2.0), (1, 1.0)]);
        let s = stencil(5, 5, 1, 4).unwrap();
        let expect = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for ((_, w), e) in s.iter().zip(expect) {
            assert!((w - e).abs() < 1e-14);
        }
    }

    #[test]
    fn one_sided_is_exact_on_polynomials() {
        // second derivative, order 2, at the left boundary: exact for cubics
        let s = stencil(0, 10, 2, 2).unwrap();
        assert_eq!(s.len(), 4);
        let f = |x: f64| 1.0 + 2.0 * x - x * x + 0.5 * x * x * x;
        let d2: f64 = s.iter().map(|&(o, w)| w * f(o as f64)).sum();
        assert!((d2 - (-2.0)).abs() < 1e-12);
        let s = stencil(10, 1, 1, 4).unwrap();
        let g = |x: f64| x.powi(4) - 2.0 * x.powi(3);
        let d1: f64 = s.iter().map(|&(o, w)| w * g(o as f64)).sum();
        // five points: exact for degree <= 4
        assert!(d1.abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(stencil(0, 2, 2, 4).is_none());
    }
}
