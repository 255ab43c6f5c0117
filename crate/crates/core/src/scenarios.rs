//! Built-in scenarios and the randomized near-flat sweep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{BaseDomain, ChartSpec};
use crate::poly::Polynomial;
use crate::sobolev::{Component, Scenario, Selector};
use crate::tensorfield::TensorSpec;

fn var(i: usize) -> Polynomial {
    Polynomial::variable(i)
}

fn poly(terms: &[(f64, &[u32])]) -> Polynomial {
    terms
        .iter()
        .fold(Polynomial::zero(), |p, (c, e)| p.plus(&Polynomial::monomial(*c, e)))
}

fn scenario(name: &str, description: &str, selector: Selector, components: Vec<Component>) -> Scenario {
    Scenario {
        name: name.into(),
        description: description.into(),
        selector,
        components,
        resolutions: vec![33, 65],
    }
}

fn single(name: &str, description: &str, selector: Selector, chart: ChartSpec, tensor: TensorSpec) -> Scenario {
    scenario(name, description, selector, vec![Component { chart, tensor }])
}

fn disk() -> ChartSpec {
    ChartSpec::new(BaseDomain::PolarDisk, 4)
}

fn unit_square() -> BaseDomain {
    BaseDomain::Box {
        lo: vec![0.0, 0.0],
        hi: vec![1.0, 1.0],
    }
}

/// The catalog, in a fixed order.
pub fn catalog() -> Vec<Scenario> {
    vec![
        single(
            "flat-disk-equality",
            "Flat unit disk in R^4 with A = g. Ratio 1: the equality configuration; the Neumann \
             potential is |x|^2/2 and every rigidity diagnostic vanishes.",
            Selector::Codim2,
            disk(),
            TensorSpec::Metric,
        ),
        single(
            "flat-disk-cofactor",
            "Flat unit disk in R^4 with A the cofactor of the Hessian of the convex potential \
             |x|^2/2 + (x1^4 + x2^4)/12. Divergence-free, so only the boundary flux contributes.",
            Selector::Codim2,
            disk(),
            TensorSpec::CofactorOfPotential {
                u: Polynomial::half_norm_squared(2).plus(&poly(&[(1.0 / 12.0, &[4]), (1.0 / 12.0, &[0, 4])])),
            },
        ),
        single(
            "flat-disk-anisotropic",
            "Flat unit disk in R^4 with constant A = diag(1, 2). Strict inequality; the cofactor \
             residual stays away from zero under refinement.",
            Selector::Codim2,
            disk(),
            TensorSpec::Ambient {
                matrix: diag_matrix(&[1.0, 2.0, 0.0, 0.0]),
            },
        ),
        single(
            "sphere-codim1-lift",
            "Unit sphere S^2 in R^3 with A = g, lifted to R^4 by a flat extra coordinate. Closed \
             surface: the functional is the mean-curvature term alone and the ratio is 2.",
            Selector::Codim1,
            ChartSpec::new(BaseDomain::Sphere, 3),
            TensorSpec::Metric,
        ),
        single(
            "sphere-conformal",
            "Unit sphere S^2 in R^4 with the conformal field A = (1.5 + 0.4 x1 + 0.2 x3^2) g. Both \
             divergence and curvature terms are active; used for convergence studies.",
            Selector::Codim2,
            ChartSpec::new(BaseDomain::Sphere, 4),
            TensorSpec::Conformal {
                f: poly(&[(1.5, &[]), (0.4, &[1]), (0.2, &[0, 0, 2])]),
            },
        ),
        scenario(
            "disconnected-two-disks",
            "Two disjoint flat unit disks in R^4 with A = g. The functionals add, so the ratio is \
             sqrt(2): strict superadditivity of the right-hand side.",
            Selector::Codim2,
            vec![
                Component {
                    chart: disk(),
                    tensor: TensorSpec::Metric,
                },
                Component {
                    chart: disk().with_map(vec![
                        var(0).plus(&Polynomial::constant(3.0)),
                        var(1),
                        Polynomial::zero(),
                        Polynomial::zero(),
                    ]),
                    tensor: TensorSpec::Metric,
                },
            ],
        ),
        single(
            "flat-square",
            "Flat unit square in R^4 with A = g. Corners make the ratio 2/sqrt(pi), above 1.",
            Selector::Codim2,
            ChartSpec::new(unit_square(), 4),
            TensorSpec::Metric,
        ),
        single(
            "graph-saddle",
            "Graph of (0.3 x1 x2, 0.2 (x1^2 - x2^2)) over [-1/2, 1/2]^2 in R^4 with A = g. Curved \
             in both normal directions.",
            Selector::Codim2,
            ChartSpec::new(
                BaseDomain::Box {
                    lo: vec![-0.5, -0.5],
                    hi: vec![0.5, 0.5],
                },
                4,
            )
            .with_map(vec![
                var(0),
                var(1),
                poly(&[(0.3, &[1, 1])]),
                poly(&[(0.2, &[2]), (-0.2, &[0, 2])]),
            ]),
            TensorSpec::Metric,
        ),
        single(
            "cylinder",
            "Unit-radius cylinder of height 1 in R^4 with A = g. One principal curvature; two \
             boundary circles.",
            Selector::Codim2,
            ChartSpec::new(BaseDomain::Cylinder { z_lo: 0.0, z_hi: 1.0 }, 4),
            TensorSpec::Metric,
        ),
        single(
            "flat-cube-3d",
            "Flat unit cube in R^5 with A = g. Three-dimensional case with the (det A)^(1/2) \
             volume power.",
            Selector::Codim2,
            ChartSpec::new(
                BaseDomain::Box {
                    lo: vec![0.0; 3],
                    hi: vec![1.0; 3],
                },
                5,
            ),
            TensorSpec::Metric,
        ),
    ]
}

pub fn builtin(name: &str) -> Option<Scenario> {
    catalog().into_iter().find(|s| s.name == name)
}

fn diag_matrix(d: &[f64]) -> Vec<Vec<Polynomial>> {
    (0..d.len())
        .map(|i| {
            (0..d.len())
                .map(|j| if i == j { Polynomial::constant(d[i]) } else { Polynomial::zero() })
                .collect()
        })
        .collect()
}

/// Random quadratic in `vars` variables with coefficients in `[-amp, amp]`
/// and no constant or linear part.
fn random_quadratic(rng: &mut impl Rng, vars: usize, amp: f64) -> Polynomial {
    let mut p = Polynomial::zero();
    for i in 0..vars {
        for j in i..vars {
            let mut e = vec![0u32; vars];
            e[i] += 1;
            e[j] += 1;
            p = p.plus(&Polynomial::monomial(rng.random_range(-amp..=amp), &e));
        }
    }
    p
}

/// Conformal factor `1 + small linear + small quadratic`, positive on the
/// ball of radius 1.5 in `R^dim`.
fn random_factor(rng: &mut impl Rng, dim: usize) -> Polynomial {
    let mut f = Polynomial::constant(1.0);
    for i in 0..dim {
        f = f.plus(&var(i).scaled(rng.random_range(-0.08..=0.08)));
    }
    f.plus(&random_quadratic(rng, dim, 0.02))
}

/// A small constant positive semi-definite ambient matrix `ε B^T B`.
fn random_psd(rng: &mut impl Rng, dim: usize) -> Vec<Vec<Polynomial>> {
    let b: Vec<Vec<f64>> = (0..dim)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    let eps = rng.random_range(0.0..=0.3) / dim as f64;
    (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| Polynomial::constant(eps * (0..dim).map(|k| b[k][i] * b[k][j]).sum::<f64>()))
                .collect()
        })
        .collect()
}

/// `count` randomized codimension-2 scenarios: near-flat polynomial graphs
/// over squares and disks and perturbed spheres, each carrying a random
/// conformal factor plus a small positive ambient perturbation.
pub fn random_sweep(seed: u64, count: usize) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let kind = i % 3;
            let chart = match kind {
                0 => {
                    let half = rng.random_range(0.3..=0.7);
                    ChartSpec::new(
                        BaseDomain::Box {
                            lo: vec![-half; 2],
                            hi: vec![half; 2],
                        },
                        4,
                    )
                    .with_map(vec![
                        var(0).plus(&random_quadratic(&mut rng, 2, 0.05)),
                        var(1).plus(&random_quadratic(&mut rng, 2, 0.05)),
                        random_quadratic(&mut rng, 2, 0.3),
                        random_quadratic(&mut rng, 2, 0.3),
                    ])
                }
                1 => disk().with_map(vec![
                    var(0),
                    var(1),
                    random_quadratic(&mut rng, 2, 0.3),
                    random_quadratic(&mut rng, 2, 0.3),
                ]),
                _ => ChartSpec::new(BaseDomain::Sphere, 4).with_map(vec![
                    var(0),
                    var(1),
                    var(2),
                    random_quadratic(&mut rng, 3, 0.3),
                ]),
            };
            let tensor = TensorSpec::Sum {
                parts: vec![
                    TensorSpec::Conformal {
                        f: random_factor(&mut rng, 4),
                    },
                    TensorSpec::Ambient {
                        matrix: random_psd(&mut rng, 4),
                    },
                ],
            };
            let label = ["graph-square", "graph-disk", "perturbed-sphere"][kind];
            single(
                &format!("random-{label}-{i:03}"),
                "Randomized near-flat immersion with a conformal-plus-perturbation field.",
                Selector::Codim2,
                chart,
                tensor,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_names_are_unique_and_valid() {
        let cat = catalog();
        for (i, s) in cat.iter().enumerate() {
            s.validate().unwrap();
            assert!(!s.description.is_empty());
            assert!(cat[i + 1..].iter().all(|t| t.name != s.name));
        }
        for name in ["flat-disk-equality", "sphere-codim1-lift", "disconnected-two-disks", "sphere-conformal"] {
            assert!(builtin(name).is_some(), "{name}");
        }
    }

    #[test]
    fn random_sweep_is_seeded() {
        assert_eq!(random_sweep(4, 6), random_sweep(4, 6));
        assert_ne!(random_sweep(4, 6), random_sweep(5, 6));
        for s in random_sweep(9, 6) {
            s.validate().unwrap();
            assert_eq!(s.effective_codim(), 2);
        }
    }
}
