//! Compressed sparse row matrices and a preconditioned conjugate-gradient
//! solver for the symmetric positive-definite systems of the Neumann solve.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed in
    /// a fixed order so the result is independent of any parallel schedule
    /// upstream.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().expect("previous entry") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&k| self.cols[k] == i)
                    .map_or(0.0, |k| self.vals[k])
            })
            .collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of a converged CG solve.
#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for `(K + c w w^T) x = b`.
pub fn pcg_rank_one(
    k: &CsrMatrix,
    w: &[f64],
    c: f64,
    b: &[f64],
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = k.n;
    let apply = |x: &[f64], y: &mut [f64]| {
        k.mul_vec(x, y);
        let s = c * dot(w, x);
        for (yi, wi) in y.iter_mut().zip(w) {
            *yi += s * wi;
        }
    };
    let precond: Vec<f64> = k
        .diagonal()
        .iter()
        .zip(w)
        .map(|(d, wi)| {
            let v = d + c * wi * wi;
            if v > 0.0 {
                1.0 / v
            } else {
                1.0
            }
        })
        .collect();
    let bnorm = dot(b, b).sqrt();
    let mut x = x0;
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&precond).map(|(ri, pi)| ri * pi).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut history = Vec::new();
    for it in 0..max_iter {
        let rel = dot(&r, &r).sqrt() / bnorm;
        if it % 50 == 0 {
            history.push(rel);
        }
        if rel <= tol {
            return Ok(CgOutcome {
                x,
                iterations: it,
                relative_residual: rel,
            });
        }
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * precond[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rel = dot(&r, &r).sqrt() / bnorm;
    history.push(rel);
    Err(Error::SolverDiverged {
        iterations: max_iter,
        residual: rel,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = CsrMatrix::from_triplets(2, vec![(1, 1, 1.0), (0, 0, 2.0), (1, 1, 3.0), (0, 1, -1.0), (1, 0, -1.0)]);
        assert_eq!(m.diagonal(), vec![2.0, 4.0]);
        let mut y = vec![0.0; 2];
        m.mul_vec(&[1.0, 1.0], &mut y);
        assert_eq!(y, vec![1.0, 3.0]);
    }

    #[test]
    fn singular_laplacian_with_rank_one_fix() {
        // 1D Neumann Laplacian on 5 nodes: kernel = constants
        let n = 5;
        let mut t = Vec::new();
        for i in 0..n - 1 {
            t.extend([(i, i, 1.0), (i + 1, i + 1, 1.0), (i, i + 1, -1.0), (i + 1, i, -1.0)]);
        }
        let k = CsrMatrix::from_triplets(n, t);
        let w = vec![1.0; n];
        let b = vec![1.0, 0.0, 0.0, 0.0, -1.0];
        let out = pcg_rank_one(&k, &w, 1.0, &b, vec![0.0; n], 1e-12, 100).unwrap();
        assert!(dot(&w, &out.x).abs() < 1e-10);
        let mut kx = vec![0.0; n];
        k.mul_vec(&out.x, &mut kx);
        for (a, b) in kx.iter().zip(&b) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
