mod common;

use std::collections::BTreeSet;

use fgrnls::algebra::MultiIndex;
use fgrnls::resonance::{
    build_index_sets, check_hypotheses, enumerate_big_m, minimal_elements, resonance_budget, verify_catalog, IndexTriple, TOL_RES,
};
use fgrnls::Error;
use proptest::prelude::*;

use common::mi;

/// Every non-negative integer vector of length `n` with entries up to `top`.
fn boxes(n: usize, top: u32) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..=top).map(move |k| {
                    let mut w = v.clone();
                    w.push(k);
                    w
                })
            })
            .collect();
    }
    out
}

fn naive_big_m(lambda: &[f64], c: f64, n: u32) -> Vec<IndexTriple> {
    let vs = boxes(lambda.len(), n + 1);
    let mut out = Vec::new();
    for mu in &vs {
        for nu in &vs {
            let (a, b) = (mu.iter().sum::<u32>(), nu.iter().sum::<u32>());
            if a > n || b != a + 1 {
                continue;
            }
            for m in -(a as i32)..=a as i32 {
                let d: f64 = lambda.iter().zip(mu.iter().zip(nu)).map(|(l, (x, y))| l * (*x as f64 - *y as f64)).sum::<f64>() - m as f64;
                if d < -c {
                    out.push(IndexTriple { m, mu: MultiIndex(mu.clone()), nu: MultiIndex(nu.clone()) });
                }
            }
        }
    }
    out.sort();
    out
}

#[test]
fn budget_examples() {
    let b = resonance_budget(&[0.0, 0.7], 0.7875).unwrap();
    assert_eq!((b.n1, b.floor_c, b.n), (1, 0, 1));
    let b = resonance_budget(&[0.0, 0.3], 0.7).unwrap();
    assert_eq!((b.n1, b.n), (2, 2));
    assert!(matches!(resonance_budget(&[0.0, 0.35], 0.7), Err(Error::Hypothesis(_))));
    assert!(matches!(resonance_budget(&[0.1, 0.35], 0.7), Err(Error::Input(_))));
}

#[test]
fn poschl_teller_hypotheses_by_direct_search() {
    let (l1, c) = (0.7, 0.7875);
    // 0.7 k + m = c has no solution with |k| <= 3, |m| <= 1
    for k in -3i32..=3 {
        for m in -1i32..=1 {
            assert!((0.7 * k as f64 + m as f64 - c).abs() > 1e-6);
        }
    }
    // 0.7 k + m = 0 forces k to be a multiple of 10
    for k in -6i32..=6 {
        for m in -2i32..=2 {
            if (k, m) != (0, 0) {
                assert!((l1 * k as f64 + m as f64).abs() > 1e-6);
            }
        }
    }
    let b = resonance_budget(&[0.0, l1], c).unwrap();
    assert!(check_hypotheses(&[0.0, l1], c, &b, TOL_RES).clean());
}

#[test]
fn h8_violation_has_a_witness() {
    let l = [0.0, 2.0];
    let c = 2.25;
    let b = fgrnls::resonance::ResonanceBudget { n_j: vec![1], floor_c: 2, n1: 1, n: 2 };
    let r = check_hypotheses(&l, c, &b, TOL_RES);
    assert!(!r.h8);
    let w = r.violations.iter().find(|w| w.hypothesis == "H8").unwrap();
    let v: f64 = w.mu.iter().zip(&l).map(|(a, x)| *a as f64 * x).sum::<f64>() + w.m as f64;
    assert!(v.abs() < 1e-12);
    assert!(r.violations.iter().any(|w| w.mu == vec![0, 1] && w.m == -2));
    assert!(matches!(build_index_sets(&l, c, &b), Err(Error::Hypothesis(_))));
}

#[test]
fn membership_examples() {
    let l = [0.0, 0.7];
    let c = 0.7875;
    let b = resonance_budget(&l, c).unwrap();
    let cat = build_index_sets(&l, c, &b).unwrap();
    assert!(cat.big_m.contains(&IndexTriple { m: 1, mu: mi(&[0, 1]), nu: mi(&[0, 2]) }));
    assert!(!cat.big_m.contains(&IndexTriple { m: 0, mu: mi(&[0, 0]), nu: mi(&[0, 1]) }));
    assert_eq!(cat.big_m, naive_big_m(&l, c, b.n));
    assert_eq!(cat.minimal.len(), cat.minimal_prime.len());
    assert!(cat.shells.iter().all(|s| s.w > c));
    verify_catalog(&cat).unwrap();
}

#[test]
fn minimal_elements_by_hand() {
    let a = IndexTriple { m: 0, mu: mi(&[0, 1]), nu: mi(&[0, 2]) };
    let b = IndexTriple { m: 0, mu: mi(&[1, 1]), nu: mi(&[0, 3]) };
    let c = IndexTriple { m: 1, mu: mi(&[1, 1]), nu: mi(&[0, 3]) };
    let min = minimal_elements(&[a.clone(), b, c.clone()]);
    assert_eq!(min, vec![a, c]);
}

#[test]
fn mirror_of_mirror_is_identity() {
    let t = IndexTriple { m: -1, mu: mi(&[2, 0]), nu: mi(&[1, 2]) };
    assert_eq!(t.mirror().mirror(), t);
    assert!((t.mirror().detuning(&[0.0, 0.7]) + t.detuning(&[0.0, 0.7])).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn catalog_matches_brute_force(l1 in 0.15f64..0.95, gap in 0.01f64..0.6, two in proptest::bool::ANY, l2f in 0.1f64..0.9) {
        let mut lambda = vec![0.0, l1];
        if two {
            lambda.push(l1 + (1.0 - l1) * l2f);
        }
        let c = lambda.last().unwrap() + gap;
        let Ok(b) = resonance_budget(&lambda, c) else { return Ok(()) };
        prop_assume!(b.n <= 3);
        let report = check_hypotheses(&lambda, c, &b, TOL_RES);
        prop_assume!(report.clean());
        let cat = build_index_sets(&lambda, c, &b).unwrap();
        let naive = naive_big_m(&lambda, c, b.n);
        prop_assert_eq!(&cat.big_m, &naive);
        prop_assert_eq!(&enumerate_big_m(&lambda, c, b.n).unwrap(), &naive);

        // every element of bigM sits above some minimal element with the same m
        for t in &naive {
            prop_assert!(cat.minimal.iter().any(|a| a.m == t.m && a.mu.le(&t.mu) && a.nu.le(&t.nu)));
        }
        // mirror: injective and onto M'
        let image: BTreeSet<IndexTriple> = cat.minimal.iter().map(|t| t.mirror()).collect();
        let prime: BTreeSet<IndexTriple> = cat.minimal_prime.iter().cloned().collect();
        prop_assert_eq!(image.len(), cat.minimal.len());
        prop_assert_eq!(image, prime);
        // shells partition M, sit above c, and share m
        let total: usize = cat.shells.iter().map(|s| s.members.len()).sum();
        prop_assert_eq!(total, cat.minimal.len());
        for s in &cat.shells {
            prop_assert!(s.w > c);
            prop_assert!(s.members.iter().all(|t| t.m == s.members[0].m && (-t.detuning(&lambda) - s.w).abs() < 1e-9));
        }
    }
}
