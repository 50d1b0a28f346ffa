use num_complex::Complex64 as C64;

use super::{Coupling, MultiIndex};
use crate::spectral::OperatorModel;

/// Drop threshold for merged coefficients and coupling vectors.
pub const ZERO_TOL: f64 = 1e-14;

/// Pointwise functional closing a composite term.
#[derive(Clone, Debug, PartialEq)]
pub enum Tail {
    None,
    /// `<f^a fbar^b, w>` with `a + b >= 2`.
    Local { a: u8, b: u8, weight: Coupling },
    /// `int |f|^4 / 4`.
    Quartic,
    /// `<H f, fbar>`.
    Free,
}

impl Tail {
    pub fn degrees(&self) -> (u32, u32) {
        match self {
            Tail::None => (0, 0),
            Tail::Local { a, b, .. } => (*a as u32, *b as u32),
            Tail::Quartic => (2, 2),
            Tail::Free => (1, 1),
        }
    }
}

/// `coeff * prod <Phi_i, f> * prod <Psi_i, fbar> * tail`.
#[derive(Clone, Debug, PartialEq)]
pub struct Composite {
    pub coeff: C64,
    pub f_factors: Vec<Coupling>,
    pub fbar_factors: Vec<Coupling>,
    pub tail: Tail,
}

impl Composite {
    pub fn scalar(coeff: C64) -> Self {
        Self { coeff, f_factors: Vec::new(), fbar_factors: Vec::new(), tail: Tail::None }
    }

    pub fn f_degree(&self) -> u32 {
        self.f_factors.len() as u32 + self.tail.degrees().0
    }

    pub fn fbar_degree(&self) -> u32 {
        self.fbar_factors.len() as u32 + self.tail.degrees().1
    }

    fn sort_factors(&mut self) {
        self.f_factors.sort_by_key(|c| c.id());
        self.fbar_factors.sort_by_key(|c| c.id());
    }

    fn magnitude(&self, h: f64) -> f64 {
        let mut m = self.coeff.norm();
        for c in self.f_factors.iter().chain(&self.fbar_factors) {
            m *= c.l2_norm(h);
        }
        if let Tail::Local { weight, .. } = &self.tail {
            m *= weight.l2_norm(h);
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TermKind {
    Scalar(C64),
    /// `<Phi, f>`.
    LinearF(Coupling),
    /// `<Psi, fbar>`.
    LinearFbar(Coupling),
    Composite(Composite),
}

/// `exp(i m t) z^mu zbar^nu * kind`.
#[derive(Clone, Debug, PartialEq)]
pub struct HamTerm {
    pub m: i32,
    pub mu: MultiIndex,
    pub nu: MultiIndex,
    pub kind: TermKind,
}

/// Evaluation point with `z`, `zbar`, `f`, `fbar` treated as independent.
#[derive(Clone, Copy, Debug)]
pub struct Point<'a> {
    pub t: f64,
    pub z: &'a [C64],
    pub zbar: &'a [C64],
    pub f: &'a [C64],
    pub fbar: &'a [C64],
}

/// Owned evaluation point.
#[derive(Clone, Debug)]
pub struct PointBuf {
    pub t: f64,
    pub z: Vec<C64>,
    pub zbar: Vec<C64>,
    pub f: Vec<C64>,
    pub fbar: Vec<C64>,
}

impl PointBuf {
    /// Physical point: `zbar = conj z`, `fbar = conj f`.
    pub fn physical(t: f64, z: &[C64], f: &[C64]) -> Self {
        Self {
            t,
            z: z.to_vec(),
            zbar: z.iter().map(|v| v.conj()).collect(),
            f: f.to_vec(),
            fbar: f.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn view(&self) -> Point<'_> {
        Point { t: self.t, z: &self.z, zbar: &self.zbar, f: &self.f, fbar: &self.fbar }
    }
}

impl HamTerm {
    pub fn scalar(m: i32, mu: MultiIndex, nu: MultiIndex, k: C64) -> Self {
        Self { m, mu, nu, kind: TermKind::Scalar(k) }
    }

    pub fn n_modes(&self) -> usize {
        self.mu.len()
    }

    /// Total degree in `(z, f)` and in `(zbar, fbar)`.
    pub fn degrees(&self) -> (u32, u32) {
        let (a, b) = match &self.kind {
            TermKind::Scalar(_) => (0, 0),
            TermKind::LinearF(_) => (1, 0),
            TermKind::LinearFbar(_) => (0, 1),
            TermKind::Composite(c) => (c.f_degree(), c.fbar_degree()),
        };
        (self.mu.order() + a, self.nu.order() + b)
    }

    pub fn total_degree(&self) -> u32 {
        let (a, b) = self.degrees();
        a + b
    }

    /// Degree ledger `L` with `L + 1` the common degree of both sides, for balanced terms.
    pub fn ledger(&self) -> Option<u32> {
        let (a, b) = self.degrees();
        if a == b && a >= 1 {
            Some(a - 1)
        } else {
            None
        }
    }

    /// Total `f`-degree (number of `f` and `fbar` slots).
    pub fn field_degree(&self) -> u32 {
        match &self.kind {
            TermKind::Scalar(_) => 0,
            TermKind::LinearF(_) | TermKind::LinearFbar(_) => 1,
            TermKind::Composite(c) => c.f_degree() + c.fbar_degree(),
        }
    }

    pub fn is_quartic(&self) -> bool {
        matches!(&self.kind, TermKind::Composite(c) if c.tail == Tail::Quartic)
    }

    /// `exp(i m t) z^mu zbar^nu`.
    pub fn monomial(&self, p: &Point) -> C64 {
        C64::from_polar(1.0, self.m as f64 * p.t) * self.mu.monomial(p.z) * self.nu.monomial(p.zbar)
    }

    pub fn evaluate(&self, p: &Point, model: &OperatorModel) -> C64 {
        let h = model.h();
        let body = match &self.kind {
            TermKind::Scalar(k) => *k,
            TermKind::LinearF(c) => c.pair(h, p.f),
            TermKind::LinearFbar(c) => c.pair(h, p.fbar),
            TermKind::Composite(c) => evaluate_composite(c, p, model),
        };
        self.monomial(p) * body
    }

    pub fn scaled(&self, s: C64) -> HamTerm {
        let kind = match &self.kind {
            TermKind::Scalar(k) => TermKind::Scalar(k * s),
            TermKind::LinearF(c) => TermKind::LinearF(c.scale(s)),
            TermKind::LinearFbar(c) => TermKind::LinearFbar(c.scale(s)),
            TermKind::Composite(c) => {
                let mut c = c.clone();
                c.coeff *= s;
                TermKind::Composite(c)
            }
        };
        HamTerm { m: self.m, mu: self.mu.clone(), nu: self.nu.clone(), kind }
    }

    pub fn magnitude(&self, h: f64) -> f64 {
        match &self.kind {
            TermKind::Scalar(k) => k.norm(),
            TermKind::LinearF(c) | TermKind::LinearFbar(c) => c.l2_norm(h),
            TermKind::Composite(c) => c.magnitude(h),
        }
    }

    pub fn as_composite(&self) -> Composite {
        match &self.kind {
            TermKind::Scalar(k) => Composite::scalar(*k),
            TermKind::LinearF(c) => Composite {
                coeff: C64::new(1.0, 0.0),
                f_factors: vec![c.clone()],
                fbar_factors: Vec::new(),
                tail: Tail::None,
            },
            TermKind::LinearFbar(c) => Composite {
                coeff: C64::new(1.0, 0.0),
                f_factors: Vec::new(),
                fbar_factors: vec![c.clone()],
                tail: Tail::None,
            },
            TermKind::Composite(c) => c.clone(),
        }
    }

    /// Product of two terms; at most one of them may carry a tail.
    pub fn product(&self, other: &HamTerm, model: &OperatorModel) -> HamTerm {
        let mut a = self.as_composite();
        let b = other.as_composite();
        a.coeff *= b.coeff;
        a.f_factors.extend(b.f_factors);
        a.fbar_factors.extend(b.fbar_factors);
        match (&a.tail, b.tail) {
            (_, Tail::None) => {}
            (Tail::None, t) => a.tail = t,
            _ => panic!("product of two tailed terms is outside the supported term classes"),
        }
        HamTerm::from_composite(self.m + other.m, self.mu.add(&other.mu), self.nu.add(&other.nu), a, model)
    }

    /// Normalizes a composite into the narrowest kind.
    pub fn from_composite(m: i32, mu: MultiIndex, nu: MultiIndex, mut c: Composite, model: &OperatorModel) -> HamTerm {
        if let Tail::Local { a, b, weight } = &c.tail {
            if a + b <= 1 {
                let w = weight.clone();
                let (a, b) = (*a, *b);
                c.tail = Tail::None;
                if a + b == 0 {
                    let s: C64 = w.data().iter().sum::<C64>() * model.h();
                    c.coeff *= s;
                } else {
                    let v = Coupling::new(model.project_continuous(w.data()));
                    if a == 1 {
                        c.f_factors.push(v);
                    } else {
                        c.fbar_factors.push(v);
                    }
                }
            }
        }
        let kind = if c.tail == Tail::None && c.f_factors.is_empty() && c.fbar_factors.is_empty() {
            TermKind::Scalar(c.coeff)
        } else if c.tail == Tail::None && c.f_factors.len() == 1 && c.fbar_factors.is_empty() {
            TermKind::LinearF(c.f_factors[0].scale(c.coeff))
        } else if c.tail == Tail::None && c.fbar_factors.len() == 1 && c.f_factors.is_empty() {
            TermKind::LinearFbar(c.fbar_factors[0].scale(c.coeff))
        } else {
            c.sort_factors();
            TermKind::Composite(c)
        };
        HamTerm { m, mu, nu, kind }
    }
}

pub(crate) fn evaluate_composite(c: &Composite, p: &Point, model: &OperatorModel) -> C64 {
    let h = model.h();
    let mut v = c.coeff;
    for phi in &c.f_factors {
        v *= phi.pair(h, p.f);
    }
    for psi in &c.fbar_factors {
        v *= psi.pair(h, p.fbar);
    }
    v * evaluate_tail(&c.tail, p, model)
}

pub(crate) fn evaluate_tail(tail: &Tail, p: &Point, model: &OperatorModel) -> C64 {
    let h = model.h();
    match tail {
        Tail::None => C64::new(1.0, 0.0),
        Tail::Local { a, b, weight } => {
            let mut s = C64::new(0.0, 0.0);
            for i in 0..p.f.len() {
                let mut x = weight.data()[i];
                for _ in 0..*a {
                    x *= p.f[i];
                }
                for _ in 0..*b {
                    x *= p.fbar[i];
                }
                s += x;
            }
            s * h
        }
        Tail::Quartic => {
            let s: C64 = (0..p.f.len()).map(|i| p.f[i] * p.f[i] * p.fbar[i] * p.fbar[i]).sum();
            s * (h / 4.0)
        }
        Tail::Free => {
            let hf = model.apply(p.f);
            crate::spectral::pair(h, &hf, p.fbar)
        }
    }
}
