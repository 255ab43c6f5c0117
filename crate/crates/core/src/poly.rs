//! Multivariate polynomials with exact first and second derivatives.
//!
//! Used for immersion maps, conformal factors, potentials and ambient
//! matrix entries. Exponent vectors shorter than the point dimension are
//! implicitly zero-padded.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: f64,
    #[serde(default)]
    pub exps: Vec<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub terms: Vec<Term>,
}

fn pow(x: f64, e: u32) -> f64 {
    x.powi(e as i32)
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial {
            terms: vec![Term { coef: c, exps: vec![] }],
        }
    }

    /// The coordinate function `x_i`.
    pub fn variable(i: usize) -> Self {
        let mut exps = vec![0; i + 1];
        exps[i] = 1;
        Polynomial {
            terms: vec![Term { coef: 1.0, exps }],
        }
    }

    pub fn monomial(coef: f64, exps: &[u32]) -> Self {
        Polynomial {
            terms: vec![Term {
                coef,
                exps: exps.to_vec(),
            }],
        }
    }

    /// `|x|^2 / 2` in `dim` variables.
    pub fn half_norm_squared(dim: usize) -> Self {
        let mut p = Polynomial::zero();
        for i in 0..dim {
            let mut e = vec![0; dim];
            e[i] = 2;
            p.terms.push(Term { coef: 0.5, exps: e });
        }
        p
    }

    pub fn plus(mut self, other: &Polynomial) -> Self {
        self.terms.extend(other.terms.iter().cloned());
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.coef *= s;
        }
        self
    }

    /// Number of variables actually referenced.
    pub fn nvars(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.exps.iter().rposition(|&e| e > 0).map_or(0, |p| p + 1))
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coef
                    * t.exps
                        .iter()
                        .enumerate()
                        .map(|(i, &e)| if e == 0 { 1.0 } else { pow(x[i], e) })
                        .product::<f64>()
            })
            .sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut g = vec![0.0; d];
        for t in &self.terms {
            for k in 0..t.exps.len().min(d) {
                let ek = t.exps[k];
                if ek == 0 {
                    continue;
                }
                let mut v = t.coef * ek as f64 * pow(x[k], ek - 1);
                for (i, &e) in t.exps.iter().enumerate() {
                    if i != k && e > 0 {
                        v *= pow(x[i], e);
                    }
                }
                g[k] += v;
            }
        }
        g
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let d = x.len();
        let mut h = DMatrix::zeros(d, d);
        for t in &self.terms {
            let ne = t.exps.len().min(d);
            for k in 0..ne {
                for l in k..ne {
                    let (ek, el) = (t.exps[k], t.exps[l]);
                    let coeff = if k == l {
                        if ek < 2 {
                            continue;
                        }
                        (ek * (ek - 1)) as f64
                    } else {
                        if ek == 0 || el == 0 {
                            continue;
                        }
                        (ek * el) as f64
                    };
                    let mut v = t.coef * coeff;
                    for (i, &e) in t.exps.iter().enumerate() {
                        let reduced = if i == k && i == l {
                            e - 2
                        } else if i == k || i == l {
                            e - 1
                        } else {
                            e
                        };
                        if reduced > 0 {
                            v *= pow(x[i], reduced);
                        }
                    }
                    h[(k, l)] += v;
                    if k != l {
                        h[(l, k)] += v;
                    }
                }
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Polynomial {
        // 1 + 2 x0 x1^2 - 0.5 x2^3
        Polynomial::constant(1.0)
            .plus(&Polynomial::monomial(2.0, &[1, 2]))
            .plus(&Polynomial::monomial(-0.5, &[0, 0, 3]))
    }

    #[test]
    fn eval_and_derivatives_match_finite_differences() {
        let p = sample();
        let x = [0.3, -0.7, 1.1];
        assert!((p.eval(&x) - (1.0 + 2.0 * 0.3 * 0.49 - 0.5 * 1.331)).abs() < 1e-14);
        let g = p.gradient(&x);
        let h = p.hessian(&x);
        let eps = 1e-5;
        for k in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += eps;
            xm[k] -= eps;
            let fd = (p.eval(&xp) - p.eval(&xm)) / (2.0 * eps);
            assert!((fd - g[k]).abs() < 1e-8);
            let gp = p.gradient(&xp);
            let gm = p.gradient(&xm);
            for l in 0..3 {
                assert!(((gp[l] - gm[l]) / (2.0 * eps) - h[(l, k)]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn nvars_and_half_norm() {
        assert_eq!(sample().nvars(), 3);
        let q = Polynomial::half_norm_squared(2);
        assert_eq!(q.eval(&[3.0, 4.0]), 12.5);
        assert_eq!(q.hessian(&[1.0, 2.0]), DMatrix::identity(2, 2));
    }
}
