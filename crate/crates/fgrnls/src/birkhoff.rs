//! Homological equation, normal-form rounds and the reduction to minimal resonant sets.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{
    bracket_hf, check_reality, expand_potential_energy, gradient_fbar, gradient_zbar, lie_powers, random_point,
    Coupling, DropLedger, HamExpansion, HamTerm, LedgerAudit, PointBuf, RealityReport, TermKind,
};
use crate::error::{Error, Result};
use crate::resonance::{IndexTriple, ResonanceCatalog, TOL_RES};
use crate::spectral::{norm2, outgoing_resolvent, pair_real, OperatorModel};

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn tol(c: f64) -> f64 {
    TOL_RES * c.abs().max(1.0)
}

/// Which boundary value to use when a resolvent argument lies in the continuum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ResolventSide {
    /// Only arguments below the threshold are accepted.
    Real,
    /// `R(w + i0)` above the threshold.
    Outgoing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum TermClass {
    Z0,
    Z1,
    Nonresonant,
    /// `R_d` for composite terms, `d` in `2..=7`.
    Remainder(u8),
}

/// Resonance class of a term. Scalar and linear terms are `Z0`, `Z1` or nonresonant;
/// composite terms go to `R_2..R_7`.
pub fn classify_term(term: &HamTerm, lambda: &[f64], c: f64) -> Result<TermClass> {
    let d = term.mu.freq_diff(&term.nu, lambda) - term.m as f64;
    let t = tol(c);
    let describe = || format!("(m={}, mu={:?}, nu={:?})", term.m, term.mu, term.nu);
    match &term.kind {
        TermKind::Scalar(_) => {
            if d.abs() <= t {
                if term.m == 0 && term.mu.order() == term.nu.order() {
                    Ok(TermClass::Z0)
                } else {
                    Err(Error::Hypothesis(format!("resonant scalar with nonzero harmonic {}", describe())))
                }
            } else {
                Ok(TermClass::Nonresonant)
            }
        }
        TermKind::LinearF(_) => {
            if (d + c).abs() <= t {
                return Err(Error::Hypothesis(format!("threshold-resonant coupling {}", describe())));
            }
            Ok(if d < -c { TermClass::Z1 } else { TermClass::Nonresonant })
        }
        TermKind::LinearFbar(_) => {
            if (d - c).abs() <= t {
                return Err(Error::Hypothesis(format!("threshold-resonant coupling {}", describe())));
            }
            Ok(if d > c { TermClass::Z1 } else { TermClass::Nonresonant })
        }
        TermKind::Composite(_) => Ok(TermClass::Remainder(composite_class(term))),
    }
}

fn composite_class(term: &HamTerm) -> u8 {
    if term.is_quartic() {
        return 6;
    }
    match term.field_degree() {
        d @ 2..=5 => d as u8,
        _ => 7,
    }
}

/// `R_d` class of a remainder term (`0` scalar, `1` linear, `2..=7` composite).
pub fn remainder_class(term: &HamTerm) -> u8 {
    match &term.kind {
        TermKind::Scalar(_) => 0,
        TermKind::LinearF(_) | TermKind::LinearFbar(_) => 1,
        TermKind::Composite(_) => composite_class(term),
    }
}

fn resolvent_for(model: &OperatorModel, arg: f64, v: &Coupling, side: ResolventSide, what: &str) -> Result<Vec<C64>> {
    // hitting lambda_j only matters when the coupling has a component along phi_j
    let h = model.h();
    let scale = norm2(h, v.data()).max(f64::MIN_POSITIVE);
    for (l, phi) in model.eigenvalues().iter().zip(model.modes()) {
        if (l - arg).abs() <= 1e-8 && pair_real(h, phi, v.data()).norm() > 1e-10 * scale {
            return Err(Error::Singular(format!("{what}: resolvent argument {arg} equals the eigenvalue {l}")));
        }
    }
    if arg >= model.c() - tol(model.c()) {
        return match side {
            ResolventSide::Real => Err(Error::Hypothesis(format!(
                "{what}: resolvent argument {arg} lies in the continuous spectrum [{}, inf)",
                model.c()
            ))),
            ResolventSide::Outgoing => outgoing_resolvent(model, C64::new(arg, 0.0), v.data()),
        };
    }
    model.resolvent_continuous(C64::new(arg, 0.0), v.data())
}

/// Generator `chi` with `{chi, H_F} = K`.
pub fn solve_homological(k: &HamExpansion, lambda: &[f64], model: &OperatorModel, side: ResolventSide) -> Result<HamExpansion> {
    let t = tol(model.c());
    let mut out = Vec::with_capacity(k.len());
    for term in k.terms() {
        let what = format!("term (m={}, mu={:?}, nu={:?})", term.m, term.mu, term.nu);
        let kind = match &term.kind {
            TermKind::Scalar(a) => {
                let d = term.mu.freq_diff(&term.nu, lambda) - term.m as f64;
                if d.abs() <= t {
                    return Err(Error::Hypothesis(format!("{what}: vanishing denominator {d:.3e}")));
                }
                TermKind::Scalar(I * a / d)
            }
            TermKind::LinearF(phi) => {
                let arg = term.nu.freq_diff(&term.mu, lambda) + term.m as f64;
                let x = resolvent_for(model, arg, phi, side, &what)?;
                TermKind::LinearF(Coupling::new(x.into_iter().map(|v| I * v).collect()))
            }
            TermKind::LinearFbar(psi) => {
                let arg = term.mu.freq_diff(&term.nu, lambda) - term.m as f64;
                let x = resolvent_for(model, arg, psi, side, &what)?;
                TermKind::LinearFbar(Coupling::new(x.into_iter().map(|v| -I * v).collect()))
            }
            TermKind::Composite(_) => {
                return Err(Error::Input(format!("{what}: composite terms have no homological solution here")));
            }
        };
        out.push(HamTerm { m: term.m, mu: term.mu.clone(), nu: term.nu.clone(), kind });
    }
    Ok(HamExpansion::from_terms(out, model.h()))
}

/// `max_term |{chi_t, H_F} - K_t| / |K_t|`, comparing terms by key.
pub fn homological_residual(chi: &HamExpansion, k: &HamExpansion, lambda: &[f64], model: &OperatorModel) -> Result<f64> {
    let h = model.h();
    let mut terms: Vec<HamTerm> = k.terms().to_vec();
    for t in chi.terms() {
        terms.push(bracket_hf(t, lambda, model)?);
    }
    let sum = HamExpansion::from_terms(terms, h);
    let scale = k.terms().iter().map(|t| t.magnitude(h)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    Ok(sum.terms().iter().map(|t| t.magnitude(h)).fold(0.0, f64::max) / scale)
}

/// Evaluation-level check of `{chi, H_F} = K` at random points: worst relative mismatch.
pub fn homological_check_points(
    chi: &HamExpansion,
    k: &HamExpansion,
    lambda: &[f64],
    model: &OperatorModel,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bracket = Vec::new();
    for t in chi.terms() {
        // {chi, H_F} = -{H_F, chi}
        bracket.push(bracket_hf(t, lambda, model)?.scaled(C64::new(-1.0, 0.0)));
    }
    let bracket = HamExpansion::from_terms(bracket, model.h());
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let p = random_point(model, lambda.len(), 1.0, &mut rng);
        let v = p.view();
        let a = bracket.evaluate(&v, model);
        let b = k.evaluate(&v, model);
        let scale = k.evaluate_abs(&v, model).max(f64::MIN_POSITIVE);
        worst = worst.max((a - b).norm() / scale);
    }
    Ok(worst)
}

/// Bookkeeping of one normal-form round.
#[derive(Clone, Debug, Serialize)]
pub struct RoundLedger {
    pub r: u32,
    pub generator_terms: usize,
    pub resonant_terms: usize,
    pub solved_terms: usize,
    /// Term-by-term homological residual, relative.
    pub homological_residual: f64,
    pub dropped: DropLedger,
    pub audit: LedgerAudit,
    /// Term counts per `R_d` class after the round.
    pub classes: BTreeMap<u8, usize>,
    pub reality: RealityReport,
    #[serde(skip)]
    pub chi: HamExpansion,
    #[serde(skip)]
    pub z_new: HamExpansion,
    #[serde(skip)]
    pub k: HamExpansion,
}

/// `H_F + Z + R` after `r - 1` rounds.
#[derive(Clone, Debug)]
pub struct NormalForm {
    pub lambda: Vec<f64>,
    pub c: f64,
    pub r: u32,
    pub z: HamExpansion,
    pub rest: HamExpansion,
    pub rounds: Vec<RoundLedger>,
}

impl NormalForm {
    /// Base case: `Z = 0` and `R` the quartic energy in Hamiltonian normalization
    /// (the coefficient `gamma` of the equation appears as `2 gamma` in `int |u|^4 / 4`).
    pub fn initial(model: &OperatorModel, gamma0: f64, gamma1: f64) -> NormalForm {
        NormalForm {
            lambda: model.eigenvalues().to_vec(),
            c: model.c(),
            r: 1,
            z: HamExpansion::new(),
            rest: expand_potential_energy(model, 2.0 * gamma0, 2.0 * gamma1),
            rounds: Vec::new(),
        }
    }

    /// `Z + R` (everything but `H_F`).
    pub fn perturbation(&self, h: f64) -> HamExpansion {
        self.z.plus(&self.rest, h)
    }

    /// Generators of all rounds so far, in order.
    pub fn generators(&self) -> Vec<&HamExpansion> {
        self.rounds.iter().map(|l| &l.chi).collect()
    }
}

fn is_target(t: &HamTerm, r: u32) -> bool {
    let (p, q) = (t.mu.order(), t.nu.order());
    let harm = t.m.unsigned_abs() <= r;
    match &t.kind {
        TermKind::Scalar(_) => p == r + 1 && q == r + 1 && harm,
        TermKind::LinearF(_) => p == r && q == r + 1 && harm,
        TermKind::LinearFbar(_) => q == r && p == r + 1 && harm,
        TermKind::Composite(_) => false,
    }
}

fn check_degrees(rest: &HamExpansion, r_next: u32) -> Result<()> {
    for t in rest.terms() {
        let ok = match &t.kind {
            TermKind::Scalar(_) => t.mu.order() == t.nu.order() && t.mu.order() > r_next,
            TermKind::LinearF(_) | TermKind::LinearFbar(_) => t.mu.order() + t.nu.order() > 2 * r_next,
            TermKind::Composite(_) => true,
        };
        if !ok {
            return Err(Error::Numerical(format!(
                "ledger inconsistency: term (m={}, mu={:?}, nu={:?}) of low degree survives round {}",
                t.m,
                t.mu,
                t.nu,
                r_next - 1
            )));
        }
        if let Some(l) = t.ledger() {
            if t.m.unsigned_abs() > l {
                return Err(Error::Numerical(format!(
                    "harmonic budget exceeded: |m| = {} > L = {l} for (mu={:?}, nu={:?})",
                    t.m.unsigned_abs(),
                    t.mu,
                    t.nu
                )));
            }
        }
    }
    Ok(())
}

/// One round: extract the degree `2r + 2` part, split it, solve, and transform.
pub fn normal_form_round(nf: &NormalForm, n0: u32, degree_cap: u32, model: &OperatorModel) -> Result<NormalForm> {
    let r = nf.r;
    let h = model.h();
    let (lambda, c) = (&nf.lambda[..], nf.c);
    let mut z_new = Vec::new();
    let mut k = Vec::new();
    let mut rest_minus = Vec::new();
    for t in nf.rest.terms() {
        if !is_target(t, r) {
            rest_minus.push(t.clone());
            continue;
        }
        match classify_term(t, lambda, c)? {
            TermClass::Z0 | TermClass::Z1 => z_new.push(t.clone()),
            _ => k.push(t.clone()),
        }
    }
    let z_new = HamExpansion::from_terms(z_new, h);
    let k = HamExpansion::from_terms(k, h);
    let rest_minus = HamExpansion::from_terms(rest_minus, h);
    let chi = solve_homological(&k, lambda, model, ResolventSide::Real)?;
    let homological_residual = homological_residual(&chi, &k, lambda, model)?;
    if homological_residual > 1e-9 {
        return Err(Error::Numerical(format!("homological residual {homological_residual:.3e} in round {r}")));
    }

    let z_next = nf.z.plus(&z_new, h);
    let p_minus_k = z_next.plus(&rest_minus, h);
    let (a_pows, mut dropped, mut audit) = lie_powers(&chi, &p_minus_k, n0, degree_cap, model)?;
    let (b_pows, drop_b, audit_b) = lie_powers(&chi, &k, n0, degree_cap, model)?;
    dropped.merge(&drop_b);
    audit.merge(&audit_b);

    let mut terms: Vec<HamTerm> = rest_minus.terms().to_vec();
    let mut fact = 1.0;
    for (j, p) in a_pows.iter().enumerate() {
        fact *= (j + 1) as f64;
        terms.extend(p.terms().iter().map(|t| t.scaled(C64::new(1.0 / fact, 0.0))));
    }
    let mut fact = 1.0;
    for (j, p) in b_pows.iter().enumerate() {
        let j1 = j as u32 + 1;
        fact *= j1 as f64;
        // K o F - K together with the H_F o F expansion, using {H_F, chi} = -K
        let mut w = 1.0 / fact;
        if j1 < n0 {
            w -= 1.0 / (fact * (j1 + 1) as f64);
        }
        terms.extend(p.terms().iter().map(|t| t.scaled(C64::new(w, 0.0))));
    }
    let rest_next = HamExpansion::from_terms(terms, h);
    check_degrees(&rest_next, r + 1)?;

    let mut classes = BTreeMap::new();
    for t in rest_next.terms() {
        *classes.entry(remainder_class(t)).or_default() += 1;
    }
    let reality = check_reality(&z_next.plus(&rest_next, h), model);
    let chi_reality = check_reality(&chi, model);
    if !chi_reality.real {
        return Err(Error::Numerical(format!(
            "generator of round {r} is not real: {}",
            chi_reality.first_violation.unwrap_or_default()
        )));
    }
    let mut rounds = nf.rounds.clone();
    rounds.push(RoundLedger {
        r,
        generator_terms: chi.len(),
        resonant_terms: z_new.len(),
        solved_terms: k.len(),
        homological_residual,
        dropped,
        audit,
        classes,
        reality,
        chi,
        z_new,
        k,
    });
    Ok(NormalForm { lambda: nf.lambda.clone(), c, r: r + 1, z: z_next, rest: rest_next, rounds })
}

/// Runs rounds `r = 1..r_max` starting from the quartic energy.
pub fn normal_form(
    model: &OperatorModel,
    gamma0: f64,
    gamma1: f64,
    r_max: u32,
    n0: u32,
    degree_cap: u32,
) -> Result<NormalForm> {
    let mut nf = NormalForm::initial(model, gamma0, gamma1);
    while nf.r < r_max {
        nf = normal_form_round(&nf, n0, degree_cap, model)?;
    }
    Ok(nf)
}

/// `H_F + Z_0 + Z_1 + R` with `Z_1` indexed by the minimal sets.
#[derive(Clone, Debug)]
pub struct ReducedForm {
    pub z0: HamExpansion,
    pub z1: HamExpansion,
    pub rest: HamExpansion,
    /// `Phi_{m mu nu}` on `M`.
    pub phi: BTreeMap<IndexTriple, Coupling>,
    /// `Psi_{m mu nu}` on `M'`.
    pub psi: BTreeMap<IndexTriple, Coupling>,
    pub reality: RealityReport,
    /// Non-minimal couplings moved into the remainder.
    pub displaced: usize,
}

pub fn reduce_to_minimal(nf: &NormalForm, catalog: &ResonanceCatalog, model: &OperatorModel) -> Result<ReducedForm> {
    let h = model.h();
    let big_m: BTreeSet<&IndexTriple> = catalog.big_m.iter().collect();
    let big_mp: BTreeSet<&IndexTriple> = catalog.big_m_prime.iter().collect();
    let min: BTreeSet<&IndexTriple> = catalog.minimal.iter().collect();
    let min_p: BTreeSet<&IndexTriple> = catalog.minimal_prime.iter().collect();
    let (mut z0, mut z1, mut moved) = (Vec::new(), Vec::new(), Vec::new());
    let mut phi = BTreeMap::new();
    let mut psi = BTreeMap::new();
    for t in nf.z.terms() {
        let key = IndexTriple { m: t.m, mu: t.mu.clone(), nu: t.nu.clone() };
        match &t.kind {
            TermKind::Scalar(_) => z0.push(t.clone()),
            TermKind::LinearF(v) => {
                if !big_m.contains(&key) {
                    return Err(Error::Numerical(format!("Z_1 coupling {key:?} is outside the resonant set")));
                }
                if min.contains(&key) {
                    phi.insert(key, v.clone());
                    z1.push(t.clone());
                } else {
                    moved.push(t.clone());
                }
            }
            TermKind::LinearFbar(v) => {
                if !big_mp.contains(&key) {
                    return Err(Error::Numerical(format!("Z_1 coupling {key:?} is outside the mirrored resonant set")));
                }
                if min_p.contains(&key) {
                    psi.insert(key, v.clone());
                    z1.push(t.clone());
                } else {
                    moved.push(t.clone());
                }
            }
            TermKind::Composite(_) => return Err(Error::Numerical("composite term inside Z".into())),
        }
    }
    let displaced = moved.len();
    let z0 = HamExpansion::from_terms(z0, h);
    let z1 = HamExpansion::from_terms(z1, h);
    let rest = nf.rest.plus(&HamExpansion::from_terms(moved, h), h);
    let reality = check_reality(&z0.plus(&z1, h), model);
    Ok(ReducedForm { z0, z1, rest, phi, psi, reality, displaced })
}

/// Time-`s` flow of the Hamiltonian vector field of `chi` from a physical point.
///
/// `s = 1` maps normal-form coordinates to the previous ones; `s = -1` inverts it.
pub fn lie_flow(chi: &HamExpansion, z: &[C64], f: &[C64], t: f64, s: f64, steps: usize, model: &OperatorModel) -> (Vec<C64>, Vec<C64>) {
    let n = z.len();
    let h = model.h();
    let grads: Vec<HamExpansion> = (0..n).map(|j| gradient_zbar(chi, j, h)).collect();
    let gf = gradient_fbar(chi);
    let field = |z: &[C64], f: &[C64]| -> (Vec<C64>, Vec<C64>) {
        let p = PointBuf::physical(t, z, f);
        let v = p.view();
        let dz: Vec<C64> = grads.iter().map(|g| -I * g.evaluate(&v, model)).collect();
        let df: Vec<C64> = gf.evaluate(&v, model).into_iter().map(|x| -I * x).collect();
        (dz, df)
    };
    let dt = s / steps as f64;
    let mut z = z.to_vec();
    let mut f = f.to_vec();
    let axpy = |x: &[C64], k: &[C64], a: f64| -> Vec<C64> { x.iter().zip(k).map(|(u, v)| u + v * a).collect() };
    for _ in 0..steps {
        let (k1z, k1f) = field(&z, &f);
        let (k2z, k2f) = field(&axpy(&z, &k1z, dt / 2.0), &axpy(&f, &k1f, dt / 2.0));
        let (k3z, k3f) = field(&axpy(&z, &k2z, dt / 2.0), &axpy(&f, &k2f, dt / 2.0));
        let (k4z, k4f) = field(&axpy(&z, &k3z, dt), &axpy(&f, &k3f, dt));
        for i in 0..n {
            z[i] += (k1z[i] + k2z[i] * 2.0 + k3z[i] * 2.0 + k4z[i]) * (dt / 6.0);
        }
        for i in 0..f.len() {
            f[i] += (k1f[i] + k2f[i] * 2.0 + k3f[i] * 2.0 + k4f[i]) * (dt / 6.0);
        }
    }
    (z, f)
}
