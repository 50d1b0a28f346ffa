use num_complex::Complex64 as C64;

use super::expansion::HamExpansion;
use super::term::{evaluate_composite, Composite, HamTerm, Point, Tail, TermKind};
use super::{Coupling, MultiIndex};
use crate::spectral::OperatorModel;

/// `d/d zbar_j` of every term.
pub fn gradient_zbar(hexp: &HamExpansion, j: usize, h: f64) -> HamExpansion {
    let terms = hexp
        .terms()
        .iter()
        .filter(|t| t.nu.get(j) > 0)
        .map(|t| {
            let k = t.nu.get(j) as f64;
            let lowered = HamTerm { m: t.m, mu: t.mu.clone(), nu: t.nu.lower(j), kind: t.kind.clone() };
            lowered.scaled(C64::new(k, 0.0))
        })
        .collect();
    HamExpansion::from_terms(terms, h)
}

/// Vector factor of a gradient term.
#[derive(Clone, Debug)]
pub enum VectorPart {
    Fixed(Coupling),
    /// Pointwise `f^a fbar^b w`.
    Local { a: u8, b: u8, weight: Coupling },
    /// `H f`.
    FreeH,
    /// `f^2 fbar / 2`.
    QuarticGradient,
}

/// `exp(i m t) z^mu zbar^nu * prefactor(f, fbar) * vector`.
#[derive(Clone, Debug)]
pub struct VectorTerm {
    pub m: i32,
    pub mu: MultiIndex,
    pub nu: MultiIndex,
    pub prefactor: Composite,
    pub vector: VectorPart,
}

/// Grid-vector valued expansion.
#[derive(Clone, Debug, Default)]
pub struct VectorExpansion {
    pub terms: Vec<VectorTerm>,
}

impl VectorExpansion {
    pub fn evaluate(&self, p: &Point, model: &OperatorModel) -> Vec<C64> {
        let npts = p.f.len();
        let mut out = vec![C64::new(0.0, 0.0); npts];
        let mut hf: Option<Vec<C64>> = None;
        for t in &self.terms {
            let mono = C64::from_polar(1.0, t.m as f64 * p.t) * t.mu.monomial(p.z) * t.nu.monomial(p.zbar);
            let s = mono * evaluate_composite(&t.prefactor, p, model);
            match &t.vector {
                VectorPart::Fixed(c) => {
                    for (o, v) in out.iter_mut().zip(c.data()) {
                        *o += s * v;
                    }
                }
                VectorPart::Local { a, b, weight } => {
                    for i in 0..npts {
                        let mut x = weight.data()[i];
                        for _ in 0..*a {
                            x *= p.f[i];
                        }
                        for _ in 0..*b {
                            x *= p.fbar[i];
                        }
                        out[i] += s * x;
                    }
                }
                VectorPart::QuarticGradient => {
                    for i in 0..npts {
                        out[i] += s * p.f[i] * p.f[i] * p.fbar[i] * 0.5;
                    }
                }
                VectorPart::FreeH => {
                    let hv = hf.get_or_insert_with(|| model.apply(p.f));
                    for (o, v) in out.iter_mut().zip(hv.iter()) {
                        *o += s * v;
                    }
                }
            }
        }
        out
    }
}

/// `grad_fbar` of every term, as a vector-valued expansion.
pub fn gradient_fbar(hexp: &HamExpansion) -> VectorExpansion {
    let mut terms = Vec::new();
    for t in hexp.terms() {
        let c = match &t.kind {
            TermKind::Scalar(_) | TermKind::LinearF(_) => continue,
            _ => t.as_composite(),
        };
        let push = |terms: &mut Vec<VectorTerm>, prefactor: Composite, vector: VectorPart| {
            terms.push(VectorTerm { m: t.m, mu: t.mu.clone(), nu: t.nu.clone(), prefactor, vector });
        };
        for i in 0..c.fbar_factors.len() {
            let mut rest = c.clone();
            let v = rest.fbar_factors.remove(i);
            push(&mut terms, rest, VectorPart::Fixed(v));
        }
        let mut bare = c.clone();
        bare.tail = Tail::None;
        match &c.tail {
            Tail::None => {}
            Tail::Local { a, b, weight } if *b > 0 => {
                bare.coeff *= *b as f64;
                push(&mut terms, bare, VectorPart::Local { a: *a, b: b - 1, weight: weight.clone() });
            }
            Tail::Local { .. } => {}
            Tail::Quartic => push(&mut terms, bare, VectorPart::QuarticGradient),
            Tail::Free => push(&mut terms, bare, VectorPart::FreeH),
        }
    }
    VectorExpansion { terms }
}
