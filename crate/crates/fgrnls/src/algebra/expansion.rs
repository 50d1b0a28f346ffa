use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde_json::{json, Value};

use super::term::{Composite, HamTerm, Point, Tail, TermKind, ZERO_TOL};
use super::{Coupling, MultiIndex};
use crate::spectral::OperatorModel;

/// Merge key: harmonic, exponents and kind signature.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermKey {
    pub m: i32,
    pub mu: MultiIndex,
    pub nu: MultiIndex,
    pub kind: KindKey,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KindKey {
    Scalar,
    LinearF,
    LinearFbar,
    Composite { f: Vec<u64>, fbar: Vec<u64>, tail: TailKey },
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TailKey {
    None,
    Local(u8, u8),
    Quartic,
    Free,
}

impl TermKey {
    pub fn of(term: &HamTerm) -> TermKey {
        let kind = match &term.kind {
            TermKind::Scalar(_) => KindKey::Scalar,
            TermKind::LinearF(_) => KindKey::LinearF,
            TermKind::LinearFbar(_) => KindKey::LinearFbar,
            TermKind::Composite(c) => KindKey::Composite {
                f: c.f_factors.iter().map(|v| v.id()).collect(),
                fbar: c.fbar_factors.iter().map(|v| v.id()).collect(),
                tail: match &c.tail {
                    Tail::None => TailKey::None,
                    Tail::Local { a, b, .. } => TailKey::Local(*a, *b),
                    Tail::Quartic => TailKey::Quartic,
                    Tail::Free => TailKey::Free,
                },
            },
        };
        TermKey { m: term.m, mu: term.mu.clone(), nu: term.nu.clone(), kind }
    }
}

/// Canonical sum of terms: merged by key, ordered by key, negligible terms dropped.
#[derive(Clone, Debug, Default)]
pub struct HamExpansion {
    terms: Vec<HamTerm>,
}

enum Acc {
    Scalar(C64),
    Vector(Vec<C64>),
    Composite(Composite, Option<Vec<C64>>),
}

fn add_into(dst: &mut [C64], src: &[C64], s: C64) {
    for (d, v) in dst.iter_mut().zip(src) {
        *d += v * s;
    }
}

impl HamExpansion {
    pub fn new() -> Self {
        Self::default()
    }

    /// Merges terms with equal keys. `h` is the grid spacing used for drop norms.
    pub fn from_terms(terms: Vec<HamTerm>, h: f64) -> Self {
        let mut acc: BTreeMap<TermKey, Acc> = BTreeMap::new();
        for t in terms {
            let key = TermKey::of(&t);
            match acc.get_mut(&key) {
                None => {
                    let a = match t.kind {
                        TermKind::Scalar(k) => Acc::Scalar(k),
                        TermKind::LinearF(c) | TermKind::LinearFbar(c) => Acc::Vector(c.data().to_vec()),
                        TermKind::Composite(c) => Acc::Composite(c, None),
                    };
                    acc.insert(key, a);
                }
                Some(a) => match (a, t.kind) {
                    (Acc::Scalar(k), TermKind::Scalar(k2)) => *k += k2,
                    (Acc::Vector(v), TermKind::LinearF(c)) | (Acc::Vector(v), TermKind::LinearFbar(c)) => {
                        add_into(v, c.data(), C64::new(1.0, 0.0))
                    }
                    (Acc::Composite(c, sum), TermKind::Composite(c2)) => match (&c.tail, &c2.tail) {
                        (Tail::Local { weight, .. }, Tail::Local { weight: w2, .. }) => {
                            let s = sum.get_or_insert_with(|| weight.data().iter().map(|v| v * c.coeff).collect());
                            add_into(s, w2.data(), c2.coeff);
                        }
                        _ => c.coeff += c2.coeff,
                    },
                    _ => unreachable!("kind key mismatch"),
                },
            }
        }
        let mut out = Vec::with_capacity(acc.len());
        for (key, a) in acc {
            let kind = match a {
                Acc::Scalar(k) => TermKind::Scalar(k),
                Acc::Vector(v) => match key.kind {
                    KindKey::LinearF => TermKind::LinearF(Coupling::new(v)),
                    _ => TermKind::LinearFbar(Coupling::new(v)),
                },
                Acc::Composite(mut c, sum) => {
                    if let (Some(s), Tail::Local { a, b, .. }) = (sum, &c.tail) {
                        c.tail = Tail::Local { a: *a, b: *b, weight: Coupling::new(s) };
                        c.coeff = C64::new(1.0, 0.0);
                    }
                    TermKind::Composite(c)
                }
            };
            let t = HamTerm { m: key.m, mu: key.mu, nu: key.nu, kind };
            if t.magnitude(h) > ZERO_TOL {
                out.push(t);
            }
        }
        Self { terms: out }
    }

    pub fn terms(&self) -> &[HamTerm] {
        &self.terms
    }

    pub fn into_terms(self) -> Vec<HamTerm> {
        self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn plus(&self, other: &HamExpansion, h: f64) -> HamExpansion {
        let mut t = self.terms.clone();
        t.extend(other.terms.iter().cloned());
        HamExpansion::from_terms(t, h)
    }

    pub fn scaled(&self, s: C64, h: f64) -> HamExpansion {
        HamExpansion::from_terms(self.terms.iter().map(|t| t.scaled(s)).collect(), h)
    }

    pub fn filter<F: Fn(&HamTerm) -> bool>(&self, keep: F) -> HamExpansion {
        HamExpansion { terms: self.terms.iter().filter(|t| keep(t)).cloned().collect() }
    }

    pub fn evaluate(&self, p: &Point, model: &OperatorModel) -> C64 {
        self.terms.iter().map(|t| t.evaluate(p, model)).sum()
    }

    /// Sum of the absolute values of the individual term evaluations.
    pub fn evaluate_abs(&self, p: &Point, model: &OperatorModel) -> f64 {
        self.terms.iter().map(|t| t.evaluate(p, model).norm()).sum()
    }

    /// `sum_j lambda_j |z_j|^2 + <H f, fbar>`.
    pub fn free_hamiltonian(lambda: &[f64], h: f64) -> HamExpansion {
        let n = lambda.len();
        let mut terms: Vec<HamTerm> = (0..n)
            .map(|j| HamTerm::scalar(0, MultiIndex::unit(n, j), MultiIndex::unit(n, j), C64::new(lambda[j], 0.0)))
            .collect();
        terms.push(HamTerm {
            m: 0,
            mu: MultiIndex::zeros(n),
            nu: MultiIndex::zeros(n),
            kind: TermKind::Composite(Composite {
                coeff: C64::new(1.0, 0.0),
                f_factors: Vec::new(),
                fbar_factors: Vec::new(),
                tail: Tail::Free,
            }),
        });
        HamExpansion::from_terms(terms, h)
    }

    /// JSON term records; coupling vectors are referenced by id and collected in `vectors`.
    pub fn to_json(&self, vectors: &mut BTreeMap<u64, Coupling>) -> Value {
        let mut keep = |c: &Coupling| {
            vectors.entry(c.id()).or_insert_with(|| c.clone());
            format!("{:016x}", c.id())
        };
        let recs: Vec<Value> = self
            .terms
            .iter()
            .map(|t| {
                let base = json!({"m": t.m, "mu": t.mu.0, "nu": t.nu.0});
                let mut obj = base.as_object().unwrap().clone();
                match &t.kind {
                    TermKind::Scalar(k) => {
                        obj.insert("kind".into(), json!("scalar"));
                        obj.insert("coefficient".into(), json!([k.re, k.im]));
                    }
                    TermKind::LinearF(c) => {
                        obj.insert("kind".into(), json!("linear_f"));
                        obj.insert("coupling".into(), json!(keep(c)));
                    }
                    TermKind::LinearFbar(c) => {
                        obj.insert("kind".into(), json!("linear_fbar"));
                        obj.insert("coupling".into(), json!(keep(c)));
                    }
                    TermKind::Composite(c) => {
                        obj.insert("kind".into(), json!("composite"));
                        obj.insert("coefficient".into(), json!([c.coeff.re, c.coeff.im]));
                        let f: Vec<String> = c.f_factors.iter().map(&mut keep).collect();
                        let fb: Vec<String> = c.fbar_factors.iter().map(&mut keep).collect();
                        obj.insert("alpha".into(), json!(f));
                        obj.insert("beta".into(), json!(fb));
                        let tail = match &c.tail {
                            Tail::None => json!(null),
                            Tail::Local { a, b, weight } => json!({"a": a, "b": b, "weight": keep(weight)}),
                            Tail::Quartic => json!("quartic"),
                            Tail::Free => json!("free"),
                        };
                        obj.insert("tail".into(), tail);
                    }
                }
                Value::Object(obj)
            })
            .collect();
        Value::Array(recs)
    }
}
