use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::Serialize;

use super::expansion::HamExpansion;
use super::term::{Composite, HamTerm, Tail, TermKind};
use super::Coupling;
use crate::error::{Error, Result};
use crate::spectral::OperatorModel;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `{H_F, term}` for scalar and linear terms.
pub fn bracket_hf(term: &HamTerm, lambda: &[f64], model: &OperatorModel) -> Result<HamTerm> {
    let d = term.mu.freq_diff(&term.nu, lambda) - term.m as f64;
    let kind = match &term.kind {
        TermKind::Scalar(k) => TermKind::Scalar(I * d * k),
        TermKind::LinearF(phi) => {
            // i (H - lambda.(nu - mu) - m) Phi
            let shift = term.nu.freq_diff(&term.mu, lambda) + term.m as f64;
            TermKind::LinearF(Coupling::new(shifted_apply(model, phi, shift, I)))
        }
        TermKind::LinearFbar(psi) => {
            // -i (H - lambda.(mu - nu) + m) Psi
            let shift = term.mu.freq_diff(&term.nu, lambda) - term.m as f64;
            TermKind::LinearFbar(Coupling::new(shifted_apply(model, psi, shift, -I)))
        }
        TermKind::Composite(_) => {
            return Err(Error::Input("bracket with H_F is defined for scalar and linear terms only".into()))
        }
    };
    Ok(HamTerm { m: term.m, mu: term.mu.clone(), nu: term.nu.clone(), kind })
}

fn shifted_apply(model: &OperatorModel, v: &Coupling, shift: f64, s: C64) -> Vec<C64> {
    let hv = model.apply(v.data());
    hv.iter().zip(v.data()).map(|(a, b)| s * (a - b * shift)).collect()
}

/// `(M_0, m_0)` of a generator, checking the generator shape of every term.
pub fn generator_order(chi: &HamExpansion) -> Result<(u32, u32)> {
    let mut m0: Option<u32> = None;
    let mut harmonic = 0u32;
    for t in chi.terms() {
        let (p, q) = (t.mu.order(), t.nu.order());
        let order = match &t.kind {
            TermKind::Scalar(_) if p == q && p >= 1 => p - 1,
            TermKind::LinearF(_) if q == p + 1 => p,
            TermKind::LinearFbar(_) if p == q + 1 => q,
            _ => {
                return Err(Error::Input(format!(
                    "term (m={}, mu={:?}, nu={:?}) is not of generator shape",
                    t.m, t.mu, t.nu
                )))
            }
        };
        if order == 0 {
            return Err(Error::Input("generator terms need M_0 >= 1".into()));
        }
        match m0 {
            None => m0 = Some(order),
            Some(o) if o != order => {
                return Err(Error::Input(format!("generator mixes orders {o} and {order}")));
            }
            _ => {}
        }
        harmonic = harmonic.max(t.m.unsigned_abs());
    }
    Ok((m0.unwrap_or(1), harmonic))
}

/// Closure-law tally for Lie derivatives.
#[derive(Clone, Debug, Default, Serialize)]
pub struct LedgerAudit {
    pub checked: usize,
    pub violations: usize,
    pub first_violation: Option<String>,
}

impl LedgerAudit {
    pub fn merge(&mut self, other: &LedgerAudit) {
        self.checked += other.checked;
        self.violations += other.violations;
        if self.first_violation.is_none() {
            self.first_violation = other.first_violation.clone();
        }
    }

    fn record(&mut self, input: &HamTerm, out: &HamTerm, m0_order: u32, m0_harm: u32) {
        let (Some(l), Some(l2)) = (input.ledger(), out.ledger()) else {
            return;
        };
        self.checked += 1;
        let ok = l2 == l + m0_order && out.m.unsigned_abs() <= m0_harm + input.m.unsigned_abs() && !out.is_quartic();
        if !ok {
            self.violations += 1;
            if self.first_violation.is_none() {
                self.first_violation = Some(format!(
                    "input (m={}, L={l}) -> output (m={}, mu={:?}, nu={:?}, L={l2}) with M_0={m0_order}, m_0={m0_harm}",
                    input.m, out.m, out.mu, out.nu
                ));
            }
        }
    }
}

fn d_f(g: &HamTerm, v: &Coupling, model: &OperatorModel) -> Vec<HamTerm> {
    directional(g, v, model, true)
}

fn d_fbar(g: &HamTerm, v: &Coupling, model: &OperatorModel) -> Vec<HamTerm> {
    directional(g, v, model, false)
}

/// Derivative of `g` in the `f` (or `fbar`) slot along `v`.
fn directional(g: &HamTerm, v: &Coupling, model: &OperatorModel, in_f: bool) -> Vec<HamTerm> {
    let h = model.h();
    let c = g.as_composite();
    let factors = if in_f { &c.f_factors } else { &c.fbar_factors };
    let mut out = Vec::new();
    let build = |c: Composite| HamTerm::from_composite(g.m, g.mu.clone(), g.nu.clone(), c, model);
    for i in 0..factors.len() {
        let mut rest = c.clone();
        let removed = if in_f { rest.f_factors.remove(i) } else { rest.fbar_factors.remove(i) };
        rest.coeff *= removed.pair(h, v.data());
        out.push(build(rest));
    }
    let mut tailed = c.clone();
    let new_tail = match &c.tail {
        Tail::None => None,
        Tail::Local { a, b, weight } => {
            let (a, b) = (*a, *b);
            let k = if in_f { a } else { b };
            if k == 0 {
                None
            } else {
                tailed.coeff *= k as f64;
                let w: Vec<C64> = weight.data().iter().zip(v.data()).map(|(x, y)| x * y).collect();
                let (na, nb) = if in_f { (a - 1, b) } else { (a, b - 1) };
                Some(Tail::Local { a: na, b: nb, weight: Coupling::new(w) })
            }
        }
        Tail::Quartic => {
            let w: Vec<C64> = v.data().iter().map(|x| x * 0.5).collect();
            let (na, nb) = if in_f { (1, 2) } else { (2, 1) };
            Some(Tail::Local { a: na, b: nb, weight: Coupling::new(w) })
        }
        Tail::Free => {
            let hv = Coupling::new(model.apply(v.data()));
            tailed.tail = Tail::None;
            if in_f {
                tailed.fbar_factors.push(hv);
            } else {
                tailed.f_factors.push(hv);
            }
            out.push(build(tailed.clone()));
            None
        }
    };
    if let Some(t) = new_tail {
        tailed.tail = t;
        out.push(build(tailed));
    }
    out
}

fn monomial_term(t: &HamTerm) -> HamTerm {
    HamTerm::scalar(t.m, t.mu.clone(), t.nu.clone(), C64::new(1.0, 0.0))
}

/// `{g, chi_t}` for a single generator term.
fn bracket_term(g: &HamTerm, chi: &HamTerm, model: &OperatorModel, out: &mut Vec<HamTerm>) {
    let n = g.n_modes();
    // z part
    for j in 0..n {
        let gm = g.mu.get(j);
        let cn = chi.nu.get(j);
        if gm > 0 && cn > 0 {
            let dg = HamTerm { m: g.m, mu: g.mu.lower(j), nu: g.nu.clone(), kind: g.kind.clone() };
            let dc = HamTerm { m: chi.m, mu: chi.mu.clone(), nu: chi.nu.lower(j), kind: chi.kind.clone() };
            out.push(dg.product(&dc, model).scaled(-I * (gm * cn) as f64));
        }
        let gn = g.nu.get(j);
        let cm = chi.mu.get(j);
        if gn > 0 && cm > 0 {
            let dg = HamTerm { m: g.m, mu: g.mu.clone(), nu: g.nu.lower(j), kind: g.kind.clone() };
            let dc = HamTerm { m: chi.m, mu: chi.mu.lower(j), nu: chi.nu.clone(), kind: chi.kind.clone() };
            out.push(dg.product(&dc, model).scaled(I * (gn * cm) as f64));
        }
    }
    // field part
    match &chi.kind {
        TermKind::LinearFbar(psi) => {
            let mono = monomial_term(chi);
            for t in d_f(g, psi, model) {
                out.push(t.product(&mono, model).scaled(-I));
            }
        }
        TermKind::LinearF(phi) => {
            let mono = monomial_term(chi);
            for t in d_fbar(g, phi, model) {
                out.push(t.product(&mono, model).scaled(I));
            }
        }
        _ => {}
    }
}

fn lie_terms(chi: &HamExpansion, g: &HamTerm, model: &OperatorModel, order: u32, harm: u32, audit: &mut LedgerAudit) -> Vec<HamTerm> {
    let mut out = Vec::new();
    for c in chi.terms() {
        bracket_term(g, c, model, &mut out);
    }
    for t in &out {
        audit.record(g, t, order, harm);
    }
    out
}

/// `{term, chi}` as a canonical expansion.
pub fn lie_derivative(chi: &HamExpansion, term: &HamTerm, model: &OperatorModel) -> Result<HamExpansion> {
    let (order, harm) = generator_order(chi)?;
    let mut audit = LedgerAudit::default();
    let out = lie_terms(chi, term, model, order, harm, &mut audit);
    Ok(HamExpansion::from_terms(out, model.h()))
}

/// Terms skipped because their images would exceed the degree cap.
#[derive(Clone, Debug, Default, Serialize)]
pub struct DropLedger {
    /// Skipped Lie applications keyed by the total degree their output would have.
    pub by_degree: BTreeMap<u32, usize>,
    pub skipped: usize,
}

impl DropLedger {
    pub fn merge(&mut self, other: &DropLedger) {
        self.skipped += other.skipped;
        for (k, v) in &other.by_degree {
            *self.by_degree.entry(*k).or_default() += v;
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct LieSeries {
    pub expansion: HamExpansion,
    /// `lie^l(H)` for `l = 1..=n_0`, before the factorial weights.
    pub powers: Vec<HamExpansion>,
    pub dropped: DropLedger,
    pub audit: LedgerAudit,
}

/// Iterated brackets `lie^l(H)` for `l = 1..=n_0`, capped on the total degree.
pub(crate) fn lie_powers(
    chi: &HamExpansion,
    h_in: &HamExpansion,
    n0: u32,
    degree_cap: u32,
    model: &OperatorModel,
) -> Result<(Vec<HamExpansion>, DropLedger, LedgerAudit)> {
    let (order, harm) = generator_order(chi)?;
    let mut dropped = DropLedger::default();
    let mut audit = LedgerAudit::default();
    let mut powers = Vec::new();
    if chi.is_empty() {
        return Ok((powers, dropped, audit));
    }
    let mut current = h_in.clone();
    for _ in 0..n0 {
        let mut next = Vec::new();
        for g in current.terms() {
            let out_degree = g.total_degree() + 2 * order;
            if out_degree > degree_cap {
                dropped.skipped += 1;
                *dropped.by_degree.entry(out_degree).or_default() += 1;
                continue;
            }
            next.extend(lie_terms(chi, g, model, order, harm, &mut audit));
        }
        let next = HamExpansion::from_terms(next, model.h());
        powers.push(next.clone());
        if next.is_empty() {
            break;
        }
        current = next;
    }
    Ok((powers, dropped, audit))
}

/// `H + sum_{l=1}^{n_0} lie^l(H) / l!`, dropping terms whose total degree exceeds `degree_cap`.
pub fn lie_series(chi: &HamExpansion, h_in: &HamExpansion, n0: u32, degree_cap: u32, model: &OperatorModel) -> Result<LieSeries> {
    let (powers, dropped, audit) = lie_powers(chi, h_in, n0, degree_cap, model)?;
    let mut terms: Vec<HamTerm> = h_in.terms().to_vec();
    let mut fact = 1.0;
    for (l, p) in powers.iter().enumerate() {
        fact *= (l + 1) as f64;
        terms.extend(p.terms().iter().map(|t| t.scaled(C64::new(1.0 / fact, 0.0))));
    }
    Ok(LieSeries { expansion: HamExpansion::from_terms(terms, model.h()), powers, dropped, audit })
}
