//! Small dense symmetric-matrix utilities.
//!
//! Everything here operates on matrices of dimension at most a handful
//! (tangent spaces of dimension n <= 4, ambient spaces <= 7), so dense
//! `nalgebra` storage is used throughout.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Absolute eigenvalue tolerance used for PSD / SPD decisions.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// A real symmetric matrix. Construction symmetrizes the input, so
/// `get(i, j) == get(j, i)` holds bit-for-bit.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Self {
        assert!(m.is_square() && m.nrows() >= 1, "SymMatrix must be square with dim >= 1");
        let n = m.nrows();
        let mut s = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = v;
                s[(j, i)] = v;
            }
        }
        SymMatrix(s)
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        Self::new(DMatrix::from_fn(n, n, f))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        SymMatrix(&self.0 * s)
    }

    pub fn add(&self, other: &SymMatrix) -> Self {
        SymMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &SymMatrix) -> Self {
        SymMatrix(&self.0 - &other.0)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }
}

/// Minimum-eigenvalue certificate for (uniform) positive definiteness.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpdCertificate {
    pub min_eigenvalue: f64,
    pub tolerance: f64,
}

impl SpdCertificate {
    pub fn is_valid(&self) -> bool {
        self.min_eigenvalue >= self.tolerance
    }

    pub fn for_matrix(m: &SymMatrix, tolerance: f64) -> Self {
        SpdCertificate {
            min_eigenvalue: min_eigenvalue(m),
            tolerance,
        }
    }
}

pub fn det(m: &SymMatrix) -> f64 {
    det_dense(&m.0)
}

pub fn det_dense(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => m.clone().full_piv_lu().determinant(),
    }
}

/// Adjugate (transposed cofactor matrix) of a square matrix: `adj(M) M = det(M) I`.
pub fn adjugate(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    match n {
        1 => DMatrix::from_element(1, 1, 1.0),
        2 => DMatrix::from_row_slice(2, 2, &[m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]]),
        3 => adjugate_by_minors(m),
        _ => {
            let lu = m.clone().full_piv_lu();
            let u = lu.u();
            let pivots = (0..n).map(|i| u[(i, i)].abs());
            let (lo, hi) = pivots.fold((f64::INFINITY, 0.0_f64), |(lo, hi), p| (lo.min(p), hi.max(p)));
            if hi > 0.0 && lo > 1e-10 * hi {
                let d = lu.determinant();
                match lu.try_inverse() {
                    Some(inv) => inv * d,
                    None => adjugate_by_minors(m),
                }
            } else {
                // (near-)singular: adjugate has rank <= 1, fall back to minors
                adjugate_by_minors(m)
            }
        }
    }
}

fn adjugate_by_minors(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut adj = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let minor = m.clone().remove_row(i).remove_column(j);
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            // adj = cof^T
            adj[(j, i)] = sign * det_dense(&minor);
        }
    }
    adj
}

/// Cofactor matrix `C` of a symmetric matrix; satisfies `C M = det(M) I`.
pub fn cofactor_matrix(m: &SymMatrix) -> SymMatrix {
    SymMatrix::new(adjugate(&m.0))
}

/// Sorted (ascending) eigenvalues of a symmetric matrix.
pub fn eigenvalues(m: &SymMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = match m.dim() {
        1 => vec![m.get(0, 0)],
        2 => {
            let (a, b, c) = (m.get(0, 0), m.get(0, 1), m.get(1, 1));
            let mean = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            vec![mean - rad, mean + rad]
        }
        _ => SymmetricEigen::new(m.0.clone()).eigenvalues.iter().copied().collect(),
    };
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_eigenvalue(m: &SymMatrix) -> f64 {
    eigenvalues(m)[0]
}

/// Representation of a (0,2)-tensor `t` in a `g`-orthonormal frame:
/// `L^{-1} t L^{-T}` with `g = L L^T`. Its eigenvalues are those of `g^{-1} t`.
pub fn whiten(t: &SymMatrix, g: &SymMatrix) -> Option<SymMatrix> {
    let chol = g.0.clone().cholesky()?;
    let l = chol.l();
    let linv = l.try_inverse()?;
    Some(SymMatrix::new(&linv * &t.0 * linv.transpose()))
}

/// Operator norm of the (1,1)-tensor `g^{-1} t`.
pub fn metric_op_norm(t: &SymMatrix, g: &SymMatrix) -> f64 {
    match whiten(t, g) {
        Some(w) => eigenvalues(&w).iter().fold(0.0_f64, |a, v| a.max(v.abs())),
        None => f64::NAN,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmGmCheck {
    pub holds: bool,
    pub gap: f64,
    pub equality_flag: bool,
}

/// Checks `det(AB) <= (tr(AB)/n)^n` for `A` positive definite and `B`
/// positive semi-definite, and whether `AB` is a multiple of the identity.
pub fn matrix_amgm_check(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<AmGmCheck> {
    if a.dim() != b.dim() {
        return Err(Error::GridMismatch(format!(
            "dimension mismatch {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let cert = SpdCertificate::for_matrix(a, tol);
    if !(cert.min_eigenvalue > 0.0 && cert.is_valid()) {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: cert.min_eigenvalue,
            tolerance: tol,
        });
    }
    let bmin = min_eigenvalue(b);
    if bmin < -tol {
        return Err(Error::NotPositiveSemiDefinite {
            min_eigenvalue: bmin,
            tolerance: tol,
        });
    }
    let n = a.dim();
    let ab = &a.0 * &b.0;
    let tr = ab.trace();
    let bound = (tr / n as f64).powi(n as i32);
    let gap = bound - det_dense(&ab);
    let lambda = tr / n as f64;
    let mut dist = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { lambda } else { 0.0 };
            dist = dist.max((ab[(i, j)] - target).abs());
        }
    }
    Ok(AmGmCheck {
        holds: gap >= -tol,
        gap,
        equality_flag: dist < tol,
    })
}

/// Volume of the open unit ball in `R^d`: `pi^(d/2) / Gamma(d/2 + 1)`.
pub fn unit_ball_volume(d: usize) -> f64 {
    assert!(d >= 1, "ball dimension must be >= 1");
    let half = d as f64 / 2.0;
    std::f64::consts::PI.powf(half) / gamma(half + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn det_examples() {
        assert_eq!(det(&SymMatrix::identity(3)), 1.0);
        assert_eq!(det(&SymMatrix::from_diagonal(&[1.0, 4.0])), 4.0);
    }

    #[test]
    fn cofactor_examples() {
        assert_eq!(cofactor_matrix(&SymMatrix::identity(2)), SymMatrix::identity(2));
        assert_eq!(
            cofactor_matrix(&SymMatrix::from_diagonal(&[2.0, 3.0])),
            SymMatrix::from_diagonal(&[3.0, 2.0])
        );
    }

    #[test]
    fn singular_adjugate_is_rank_one() {
        // rank n-1 matrix in dim 4 exercises the minors fallback
        let v = DMatrix::from_row_slice(4, 3, &[1., 0., 2., 0., 1., 1., 3., 1., 0., 1., 1., 1.]);
        let m = SymMatrix::new(&v * v.transpose());
        let adj = cofactor_matrix(&m);
        let prod = adj.as_matrix() * m.as_matrix();
        assert!(prod.iter().all(|x| x.abs() < 1e-8));
        assert!(adj.max_abs() > 1e-3);
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert_eq!(min_eigenvalue(&SymMatrix::from_diagonal(&[1.0, 5.0])), 1.0);
        let z = SymMatrix::identity(3).sub(&SymMatrix::identity(3));
        assert_eq!(min_eigenvalue(&z), 0.0);
    }

    #[test]
    fn amgm_examples() {
        let r = matrix_amgm_check(&SymMatrix::identity(2), &SymMatrix::identity(2), 1e-9).unwrap();
        assert!(r.holds && r.equality_flag && r.gap == 0.0);

        let a = SymMatrix::from_diagonal(&[1.0, 2.0]);
        let b = SymMatrix::from_diagonal(&[2.0, 1.0]);
        let r = matrix_amgm_check(&a, &b, 1e-9).unwrap();
        assert!(r.holds && r.equality_flag && r.gap == 0.0);

        let a = SymMatrix::from_diagonal(&[1.0, 4.0]);
        let r = matrix_amgm_check(&a, &SymMatrix::identity(2), 1e-9).unwrap();
        assert!(r.holds && !r.equality_flag);
        assert!((r.gap - 2.25).abs() < 1e-15);
    }

    #[test]
    fn amgm_rejects_bad_inputs() {
        let a = SymMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matrix_amgm_check(&a, &SymMatrix::identity(2), 1e-9).is_err());
        let b = SymMatrix::from_diagonal(&[1.0, -1e-3]);
        assert!(matrix_amgm_check(&SymMatrix::identity(2), &b, 1e-9).is_err());
    }

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(1) - 2.0).abs() < 1e-14);
        assert!((unit_ball_volume(2) - PI).abs() < 1e-14);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-13);
    }

    #[test]
    fn whiten_matches_generalized_eigenvalues() {
        let g = SymMatrix::from_diagonal(&[4.0, 1.0]);
        let t = SymMatrix::from_diagonal(&[8.0, 3.0]);
        let w = whiten(&t, &g).unwrap();
        let ev = eigenvalues(&w);
        assert!((ev[0] - 2.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }
}
