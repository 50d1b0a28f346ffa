use num_complex::Complex64 as C64;

use super::expansion::HamExpansion;
use super::term::{Composite, HamTerm, Tail, TermKind};
use super::{Coupling, MultiIndex};
use crate::spectral::OperatorModel;

fn binom2(p: u32) -> f64 {
    match p {
        0 | 2 => 1.0,
        _ => 2.0,
    }
}

/// Expansion of `gamma(t) int |z.phi + f|^4 / 4` with `gamma(t) = gamma0 + gamma1 cos t`.
pub fn expand_potential_energy(model: &OperatorModel, gamma0: f64, gamma1: f64) -> HamExpansion {
    let n = model.eigenvalues().len();
    let h = model.h();
    let modes = model.modes();
    let npts = model.grid().points;
    let harmonics: Vec<(i32, f64)> = [(0, gamma0), (1, 0.5 * gamma1), (-1, 0.5 * gamma1)]
        .into_iter()
        .filter(|(_, g)| *g != 0.0)
        .collect();
    let mut terms = Vec::new();
    if harmonics.is_empty() {
        return HamExpansion::new();
    }
    let product = |idx: &MultiIndex| -> Vec<f64> {
        let mut w = vec![1.0; npts];
        for (j, &e) in idx.0.iter().enumerate() {
            for _ in 0..e {
                for i in 0..npts {
                    w[i] *= modes[j][i];
                }
            }
        }
        w
    };
    for p in 0..=2u32 {
        for q in 0..=2u32 {
            if p == 2 && q == 2 {
                for &(m, g) in &harmonics {
                    terms.push(HamTerm {
                        m,
                        mu: MultiIndex::zeros(n),
                        nu: MultiIndex::zeros(n),
                        kind: TermKind::Composite(Composite {
                            coeff: C64::new(g, 0.0),
                            f_factors: Vec::new(),
                            fbar_factors: Vec::new(),
                            tail: Tail::Quartic,
                        }),
                    });
                }
                continue;
            }
            for mu in MultiIndex::all_of_order(n, 2 - p) {
                for nu in MultiIndex::all_of_order(n, 2 - q) {
                    let c = 0.25
                        * binom2(p)
                        * binom2(q)
                        * factorial(2 - p)
                        * factorial(2 - q)
                        / (mu.factorial() * nu.factorial());
                    let w = product(&mu.add(&nu));
                    for &(m, g) in &harmonics {
                        let s = c * g;
                        let kind = match (p, q) {
                            (0, 0) => TermKind::Scalar(C64::new(s * h * w.iter().sum::<f64>(), 0.0)),
                            (1, 0) | (0, 1) => {
                                let v: Vec<C64> = w.iter().map(|&x| C64::new(s * x, 0.0)).collect();
                                let v = Coupling::new(model.project_continuous(&v));
                                if p == 1 {
                                    TermKind::LinearF(v)
                                } else {
                                    TermKind::LinearFbar(v)
                                }
                            }
                            _ => TermKind::Composite(Composite {
                                coeff: C64::new(1.0, 0.0),
                                f_factors: Vec::new(),
                                fbar_factors: Vec::new(),
                                tail: Tail::Local {
                                    a: p as u8,
                                    b: q as u8,
                                    weight: Coupling::new(w.iter().map(|&x| C64::new(s * x, 0.0)).collect()),
                                },
                            }),
                        };
                        terms.push(HamTerm { m, mu: mu.clone(), nu: nu.clone(), kind });
                    }
                }
            }
        }
    }
    HamExpansion::from_terms(terms, h)
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(|v| v as f64).product()
}
