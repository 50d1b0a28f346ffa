//! Resonance budget, nonresonance hypotheses and the resonant index sets.

use serde::Serialize;

use crate::algebra::MultiIndex;
use crate::error::{Error, Result};

/// Relative tolerance for equalities and strict inequalities between frequency combinations.
pub const TOL_RES: f64 = 1e-9;

fn tol(c: f64) -> f64 {
    TOL_RES * c.abs().max(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResonanceBudget {
    /// `N_j` for `j = 1..=n`.
    pub n_j: Vec<u32>,
    pub floor_c: u32,
    pub n1: u32,
    /// `max(N_1, [c], 1)`.
    pub n: u32,
}

/// Computes `N_j` with `N_j lambda_j < c < (N_j + 1) lambda_j`.
pub fn resonance_budget(lambda: &[f64], c: f64) -> Result<ResonanceBudget> {
    if lambda.is_empty() || lambda[0].abs() > tol(c) {
        return Err(Error::Input("lambda_0 must be 0".into()));
    }
    if !(c > 0.0) {
        return Err(Error::Input(format!("c must be positive, got {c}")));
    }
    let mut n_j = Vec::new();
    for (j, &l) in lambda.iter().enumerate().skip(1) {
        if !(l > lambda[j - 1]) || l >= c {
            return Err(Error::Input(format!("need 0 = lambda_0 < lambda_1 <= ... < c, got lambda_{j} = {l}")));
        }
        let k = (c / l).floor();
        let below = c - k * l;
        let above = (k + 1.0) * l - c;
        if below <= tol(c) || above <= tol(c) {
            let hit = if below <= tol(c) { k } else { k + 1.0 };
            return Err(Error::Hypothesis(format!("(H6) fails: {hit} * lambda_{j} = {} equals c = {c}", hit * l)));
        }
        n_j.push(k as u32);
    }
    let n1 = n_j.iter().copied().max().unwrap_or(0);
    let floor_c = c.floor() as u32;
    Ok(ResonanceBudget { n_j, floor_c, n1, n: n1.max(floor_c).max(1) })
}

/// A violation of a nonresonance hypothesis with its witness.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub hypothesis: &'static str,
    /// Signed coefficients of `lambda_0..lambda_n`.
    pub mu: Vec<i64>,
    pub m: i64,
    pub value: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct HypothesisReport {
    pub h5: bool,
    pub h7: bool,
    pub h8: bool,
    pub violations: Vec<Witness>,
}

impl HypothesisReport {
    pub fn clean(&self) -> bool {
        self.h5 && self.h7 && self.h8
    }
}

/// Signed integer vectors over `n` slots with `sum |v_j| <= budget`, lexicographic.
fn signed_vectors(n: usize, budget: u32) -> Vec<Vec<i64>> {
    fn rec(n: usize, left: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for v in -left..=left {
            cur.push(v);
            rec(n, left - v.abs(), cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, budget as i64, &mut Vec::new(), &mut out);
    out
}

/// Exhaustive check of (H5), (H7) and (H8) over their finite ranges.
///
/// `lambda_0 = 0` contributes nothing to any combination, so the signed
/// enumeration runs over the positive eigenvalues only.
pub fn check_hypotheses(lambda: &[f64], c: f64, budget: &ResonanceBudget, tol_res: f64) -> HypothesisReport {
    let t = tol_res * c.abs().max(1.0);
    let mut report = HypothesisReport { h5: true, h7: true, h8: true, violations: Vec::new() };
    let pos = &lambda[1..];
    let n = budget.n as i64;
    if (c - c.round()).abs() <= t && c.round() >= 1.0 {
        report.h5 = false;
        report.violations.push(Witness { hypothesis: "H5", mu: vec![0; lambda.len()], m: c.round() as i64, value: c });
    }
    let full = |v: &[i64]| -> Vec<i64> {
        let mut w = vec![0];
        w.extend_from_slice(v);
        w
    };
    let value = |v: &[i64], m: i64| -> f64 { v.iter().zip(pos).map(|(&a, &l)| a as f64 * l).sum::<f64>() + m as f64 };
    for v in signed_vectors(pos.len(), (2 * n + 1) as u32) {
        for m in -n..=n {
            let x = value(&v, m);
            if (x - c).abs() <= t {
                report.h7 = false;
                report.violations.push(Witness { hypothesis: "H7", mu: full(&v), m, value: x });
            }
        }
    }
    for v in signed_vectors(pos.len(), (4 * n + 2) as u32) {
        for m in -2 * n..=2 * n {
            if m == 0 && v.iter().all(|&a| a == 0) {
                continue;
            }
            let x = value(&v, m);
            if x.abs() <= t {
                report.h8 = false;
                report.violations.push(Witness { hypothesis: "H8", mu: full(&v), m, value: x });
            }
        }
    }
    report
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct IndexTriple {
    pub m: i32,
    pub mu: MultiIndex,
    pub nu: MultiIndex,
}

impl IndexTriple {
    /// `(m, mu, nu) -> (-m, nu, mu)`.
    pub fn mirror(&self) -> IndexTriple {
        IndexTriple { m: -self.m, mu: self.nu.clone(), nu: self.mu.clone() }
    }

    /// `lambda . (mu - nu) - m`.
    pub fn detuning(&self, lambda: &[f64]) -> f64 {
        self.mu.freq_diff(&self.nu, lambda) - self.m as f64
    }
}

/// One frequency shell `M_w`.
#[derive(Clone, Debug, Serialize)]
pub struct Shell {
    pub w: f64,
    pub members: Vec<IndexTriple>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResonanceCatalog {
    pub lambda: Vec<f64>,
    pub c: f64,
    pub budget: ResonanceBudget,
    pub big_m: Vec<IndexTriple>,
    pub big_m_prime: Vec<IndexTriple>,
    pub minimal: Vec<IndexTriple>,
    pub minimal_prime: Vec<IndexTriple>,
    /// Shells in increasing `w`; their union is `minimal`.
    pub shells: Vec<Shell>,
    /// `min_w (w - c)`.
    pub min_gap: f64,
}

impl ResonanceCatalog {
    pub fn frequencies(&self) -> Vec<f64> {
        self.shells.iter().map(|s| s.w).collect()
    }
}

/// `(m, mu, nu)` with `lambda.(mu - nu) - m < -c`, `|mu| = |nu| - 1`, `|m| <= |mu| <= N`.
pub fn enumerate_big_m(lambda: &[f64], c: f64, n: u32) -> Result<Vec<IndexTriple>> {
    let len = lambda.len();
    let t = tol(c);
    let mut out = Vec::new();
    for order in 0..=n {
        for mu in MultiIndex::all_of_order(len, order) {
            for nu in MultiIndex::all_of_order(len, order + 1) {
                for m in -(order as i32)..=order as i32 {
                    let triple = IndexTriple { m, mu: mu.clone(), nu: nu.clone() };
                    let d = triple.detuning(lambda) + c;
                    if d.abs() <= t {
                        return Err(Error::Hypothesis(format!(
                            "(H7) degeneracy: lambda.(mu - nu) - m = -c for (m={m}, mu={mu:?}, nu={nu:?})"
                        )));
                    }
                    if d < 0.0 {
                        out.push(triple);
                    }
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Elements of `set` with no other element of equal `m` below them componentwise.
pub fn minimal_elements(set: &[IndexTriple]) -> Vec<IndexTriple> {
    set.iter()
        .filter(|a| {
            !set.iter().any(|b| b != *a && b.m == a.m && b.mu.le(&a.mu) && b.nu.le(&a.nu))
        })
        .cloned()
        .collect()
}

/// Builds all index sets; refuses when (H8) fails since the shells rely on it.
pub fn build_index_sets(lambda: &[f64], c: f64, budget: &ResonanceBudget) -> Result<ResonanceCatalog> {
    let report = check_hypotheses(lambda, c, budget, TOL_RES);
    if !report.h8 {
        let w = report.violations.iter().find(|w| w.hypothesis == "H8").unwrap();
        return Err(Error::Hypothesis(format!("(H8) fails: witness mu = {:?}, m = {}", w.mu, w.m)));
    }
    let big_m = enumerate_big_m(lambda, c, budget.n)?;
    let mut big_m_prime: Vec<IndexTriple> = big_m.iter().map(IndexTriple::mirror).collect();
    big_m_prime.sort();
    let minimal = minimal_elements(&big_m);
    let mut minimal_prime = minimal_elements(&big_m_prime);
    minimal_prime.sort();

    let t = tol(c);
    let mut by_w: Vec<(f64, IndexTriple)> = minimal.iter().map(|tr| (-tr.detuning(lambda), tr.clone())).collect();
    by_w.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut shells: Vec<Shell> = Vec::new();
    for (w, tr) in by_w {
        match shells.last_mut() {
            Some(s) if (w - s.w).abs() <= t => s.members.push(tr),
            _ => shells.push(Shell { w, members: vec![tr] }),
        }
    }
    let min_gap = shells.iter().map(|s| s.w - c).fold(f64::INFINITY, f64::min);
    let catalog = ResonanceCatalog {
        lambda: lambda.to_vec(),
        c,
        budget: budget.clone(),
        big_m,
        big_m_prime,
        minimal,
        minimal_prime,
        shells,
        min_gap,
    };
    verify_catalog(&catalog)?;
    Ok(catalog)
}

/// Asserts the catalog invariants: mirror bijection, shells above `c`, constant `m` and detuning per shell.
pub fn verify_catalog(cat: &ResonanceCatalog) -> Result<()> {
    let t = tol(cat.c);
    let mut mirrored: Vec<IndexTriple> = cat.minimal.iter().map(IndexTriple::mirror).collect();
    mirrored.sort();
    if mirrored != cat.minimal_prime {
        return Err(Error::Numerical("mirror map M -> M' is not a bijection".into()));
    }
    for s in &cat.shells {
        if s.w <= cat.c + t {
            return Err(Error::Numerical(format!("shell w = {} is not above c = {}", s.w, cat.c)));
        }
        let first = &s.members[0];
        for m in &s.members {
            if m.m != first.m || (m.detuning(&cat.lambda) - first.detuning(&cat.lambda)).abs() > t {
                return Err(Error::Numerical(format!("shell w = {} mixes harmonics or detunings", s.w)));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(v: &[u32]) -> MultiIndex {
        MultiIndex::from_slice(v)
    }

    #[test]
    fn budget_examples() {
        let b = resonance_budget(&[0.0, 0.7], 0.7875).unwrap();
        assert_eq!((b.n1, b.floor_c, b.n), (1, 0, 1));
        let b = resonance_budget(&[0.0, 0.3], 0.7).unwrap();
        assert_eq!((b.n1, b.n), (2, 2));
        assert!(matches!(resonance_budget(&[0.0, 0.35], 0.7), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn hypothesis_examples() {
        let l = [0.0, 0.7];
        let b = resonance_budget(&l, 0.7875).unwrap();
        let r = check_hypotheses(&l, 0.7875, &b, TOL_RES);
        assert!(r.clean(), "{:?}", r.violations);

        let l = [0.0, 2.0];
        let b = ResonanceBudget { n_j: vec![1], floor_c: 2, n1: 1, n: 2 };
        let r = check_hypotheses(&l, 2.25, &b, TOL_RES);
        assert!(!r.h8);
        assert!(r.violations.iter().any(|w| w.hypothesis == "H8" && w.mu == vec![0, 1] && w.m == -2));
    }

    #[test]
    fn h5_flags_integer_threshold() {
        let b = ResonanceBudget { n_j: vec![], floor_c: 1, n1: 0, n: 1 };
        let r = check_hypotheses(&[0.0], 1.0, &b, TOL_RES);
        assert!(!r.h5);
    }

    #[test]
    fn poschl_teller_sets() {
        let l = [0.0, 0.7];
        let b = resonance_budget(&l, 0.7875).unwrap();
        let cat = build_index_sets(&l, 0.7875, &b).unwrap();
        let t = IndexTriple { m: 1, mu: mi(&[0, 1]), nu: mi(&[0, 2]) };
        assert!(cat.big_m.contains(&t));
        let t = IndexTriple { m: 0, mu: mi(&[0, 0]), nu: mi(&[0, 1]) };
        assert!(!cat.big_m.contains(&t));
        assert_eq!(cat.minimal.len(), 6);
        assert_eq!(cat.minimal_prime.len(), 6);
        let ws = cat.frequencies();
        let expect = [1.0, 1.4, 1.7, 2.4];
        assert_eq!(ws.len(), 4);
        for (a, b) in ws.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(cat.shells[0].members.len(), 2);
    }

    #[test]
    fn refuses_h8_violation() {
        let l = [0.0, 2.0];
        let b = ResonanceBudget { n_j: vec![1], floor_c: 2, n1: 1, n: 2 };
        assert!(matches!(build_index_sets(&l, 2.25, &b), Err(Error::Hypothesis(_))));
    }
}
