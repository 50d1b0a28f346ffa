mod common;

use fgrnls::algebra::{Coupling, HamExpansion, HamTerm, TermKind};
use fgrnls::birkhoff::{
    classify_term, homological_check_points, homological_residual, lie_flow, normal_form, reduce_to_minimal, solve_homological,
    NormalForm, ResolventSide, TermClass,
};
use fgrnls::resonance::{build_index_sets, resonance_budget};
use fgrnls::spectral::{build_operator, outgoing_resolvent, to_complex, GridSpec, OperatorModel, PotentialPreset};
use fgrnls::{Error, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{c, mi, pt_small, rand_c, rel_err};

const I: C64 = C64 { re: 0.0, im: 1.0 };

fn gaussian(model: &OperatorModel) -> Vec<C64> {
    model.grid().sample_complex(|x| C64::new((-(x - 0.5) * (x - 0.5) / 2.0).exp(), 0.0))
}

fn linear_f(m: i32, mu: &[u32], nu: &[u32], v: Vec<C64>) -> HamTerm {
    HamTerm { m, mu: mi(mu), nu: mi(nu), kind: TermKind::LinearF(Coupling::new(v)) }
}

#[test]
fn classify_examples() {
    let l = [0.0, 0.7];
    let c0 = 0.7875;
    let z0 = HamTerm::scalar(0, mi(&[1, 1]), mi(&[1, 1]), c(1.0, 0.0));
    assert_eq!(classify_term(&z0, &l, c0).unwrap(), TermClass::Z0);
    let v = vec![c(1.0, 0.0); 4];
    assert_eq!(classify_term(&linear_f(1, &[0, 1], &[0, 2], v.clone()), &l, c0).unwrap(), TermClass::Z1);
    assert_eq!(classify_term(&linear_f(0, &[0, 0], &[0, 1], v.clone()), &l, c0).unwrap(), TermClass::Nonresonant);
    // resonant scalar with a nonzero harmonic cannot be normalized
    let bad = HamTerm::scalar(1, mi(&[0, 2]), mi(&[0, 0]), c(1.0, 0.0));
    assert!(matches!(classify_term(&bad, &[0.0, 0.5], c0), Err(Error::Hypothesis(_))));
    // coupling sitting exactly on the threshold
    let edge = linear_f(1, &[0, 0], &[0, 1], v);
    assert!(matches!(classify_term(&edge, &[0.0, 0.25], 1.25), Err(Error::Hypothesis(_))));
}

#[test]
fn homological_scalar_coefficient() {
    let m = pt_small();
    let l = [0.0, 0.7];
    let k = HamExpansion::from_terms(vec![HamTerm::scalar(1, mi(&[0, 1]), mi(&[2, 0]), c(1.0, 0.0))], m.h());
    let chi = solve_homological(&k, &l, m, ResolventSide::Real).unwrap();
    match chi.terms()[0].kind {
        TermKind::Scalar(v) => assert!((v - c(0.0, -10.0 / 3.0)).norm() < 1e-12),
        _ => panic!(),
    }
    assert!(homological_residual(&chi, &k, &l, m).unwrap() < 1e-14);
    assert!(homological_check_points(&chi, &k, &l, m, 20, 1).unwrap() < 1e-12);
}

#[test]
fn homological_hits_an_eigenvalue() {
    let m = pt_small();
    let k = HamExpansion::from_terms(vec![linear_f(0, &[0, 0], &[0, 1], gaussian(m))], m.h());
    let err = solve_homological(&k, m.eigenvalues(), m, ResolventSide::Real).unwrap_err();
    assert!(matches!(err, Error::Singular(_)), "{err}");
}

#[test]
fn homological_outgoing_side() {
    let m = pt_small();
    let phi = m.project_continuous(&gaussian(m));
    let k = HamExpansion::from_terms(vec![linear_f(1, &[0, 0], &[0, 1], phi.clone())], m.h());
    assert!(matches!(solve_homological(&k, m.eigenvalues(), m, ResolventSide::Real), Err(Error::Hypothesis(_))));
    let chi = solve_homological(&k, m.eigenvalues(), m, ResolventSide::Outgoing).unwrap();
    let x: Vec<C64> = match &chi.terms()[0].kind {
        TermKind::LinearF(v) => v.data().iter().map(|a| -I * a).collect(),
        _ => panic!(),
    };
    let w = 1.0 + m.eigenvalues()[1];
    let eps = outgoing_resolvent(m, C64::new(w, 1e-6), &phi).unwrap();
    assert!(rel_err(&x, &eps) < 1e-4, "{:.3e}", rel_err(&x, &eps));
    // the outgoing solution radiates: it does not decay toward the edges
    let edge = x.iter().enumerate().filter(|(i, _)| (m.grid().x(*i).abs() - 15.0).abs() < 1.0).map(|(_, v)| v.norm()).fold(0.0, f64::max);
    assert!(edge > 1e-3 * x.iter().map(|v| v.norm()).fold(0.0, f64::max));
}

#[test]
fn single_mode_normal_form() {
    let grid = GridSpec::new(40.0, 512).unwrap();
    let m = build_operator(grid, &PotentialPreset::PoschlTeller { a: 1.0, kappa2: 0.5 }, None).unwrap();
    assert_eq!(m.eigenvalues().len(), 1);
    assert!(m.c() > 0.0 && m.c() < 1.0);
    let (g0, g1) = (1.0, 3.0);
    let nf = normal_form(&m, g0, g1, 2, 3, 6).unwrap();
    let scalars: Vec<&HamTerm> = nf.z.terms().iter().filter(|t| matches!(t.kind, TermKind::Scalar(_))).collect();
    assert_eq!(scalars.len(), 1);
    let t = scalars[0];
    assert_eq!((t.m, t.mu.0.clone(), t.nu.0.clone()), (0, vec![2], vec![2]));
    // Hamiltonian normalization: 2 gamma0 int phi0^4 / 4
    let q: f64 = m.modes()[0].iter().map(|v| v.powi(4)).sum::<f64>() * m.h();
    match t.kind {
        TermKind::Scalar(k) => assert!((k - c(2.0 * g0 * q / 4.0, 0.0)).norm() < 1e-12),
        _ => unreachable!(),
    }
    // harmonics of |z_0|^4 are removed
    assert!(!nf.rest.terms().iter().any(|t| t.m != 0 && t.mu.0 == vec![2] && t.nu.0 == vec![2] && matches!(t.kind, TermKind::Scalar(_))));
}

#[test]
fn first_round_targets_come_from_the_energy() {
    let m = pt_small();
    let nf = normal_form(m, 1.0, 100.0, 2, 3, 6).unwrap();
    let init = NormalForm::initial(m, 1.0, 100.0);
    let r = &nf.rounds[0];
    let mut n = 0;
    for t in r.k.terms().iter().chain(r.z_new.terms()) {
        n += 1;
        let found = init.rest.terms().iter().any(|s| {
            s.m == t.m
                && s.mu == t.mu
                && s.nu == t.nu
                && match (&s.kind, &t.kind) {
                    (TermKind::Scalar(a), TermKind::Scalar(b)) => (a - b).norm() < 1e-14,
                    (TermKind::LinearF(a), TermKind::LinearF(b)) | (TermKind::LinearFbar(a), TermKind::LinearFbar(b)) => {
                        rel_err(a.data(), b.data()) < 1e-14
                    }
                    _ => false,
                }
        });
        assert!(found, "(m={}, mu={:?}, nu={:?})", t.m, t.mu, t.nu);
        assert!(t.total_degree() == 4 || t.field_degree() == 1);
    }
    assert!(n > 0);
}

#[test]
fn poschl_teller_reduction() {
    let m = pt_small();
    let b = resonance_budget(m.eigenvalues(), m.c()).unwrap();
    let cat = build_index_sets(m.eigenvalues(), m.c(), &b).unwrap();
    let nf = normal_form(m, 1.0, 100.0, b.n + 1, b.n + 2, 2 * b.n + 4).unwrap();
    assert!(nf.rounds.iter().all(|r| r.reality.real));
    assert!(nf.rounds.iter().all(|r| r.audit.violations == 0));
    for t in nf.z.terms() {
        let class = classify_term(t, m.eigenvalues(), m.c()).unwrap();
        assert!(matches!(class, TermClass::Z0 | TermClass::Z1));
    }
    let red = reduce_to_minimal(&nf, &cat, m).unwrap();
    assert_eq!(red.phi.len() + red.psi.len(), cat.minimal.len() + cat.minimal_prime.len());
    assert_eq!(red.z1.len(), cat.minimal.len() + cat.minimal_prime.len());
    // with N = 1 every element of bigM is minimal
    assert_eq!(red.displaced, 0);
    assert_eq!(red.rest.len(), nf.rest.len());
    assert!(red.reality.real);
}

#[test]
fn non_minimal_couplings_move_to_the_remainder() {
    let m = pt_small();
    let (l, c0) = (vec![0.0, 0.31], 0.7);
    let b = resonance_budget(&l, c0).unwrap();
    let cat = build_index_sets(&l, c0, &b).unwrap();
    let t = cat.big_m.iter().find(|t| !cat.minimal.contains(t)).expect("a non-minimal triple").clone();
    let keep = cat.minimal[0].clone();
    let phi = m.project_continuous(&gaussian(m));
    let conj: Vec<C64> = phi.iter().map(|v| v.conj()).collect();
    let mut terms = Vec::new();
    for tr in [&t, &keep] {
        terms.push(HamTerm { m: tr.m, mu: tr.mu.clone(), nu: tr.nu.clone(), kind: TermKind::LinearF(Coupling::new(phi.clone())) });
        let mr = tr.mirror();
        terms.push(HamTerm { m: mr.m, mu: mr.mu, nu: mr.nu, kind: TermKind::LinearFbar(Coupling::new(conj.clone())) });
    }
    let nf = NormalForm {
        lambda: l.clone(),
        c: c0,
        r: b.n + 1,
        z: HamExpansion::from_terms(terms, m.h()),
        rest: HamExpansion::new(),
        rounds: Vec::new(),
    };
    let red = reduce_to_minimal(&nf, &cat, m).unwrap();
    assert_eq!(red.displaced, 2);
    assert_eq!(red.rest.len(), 2);
    assert_eq!(red.z1.len(), 2);
    assert!(red.phi.contains_key(&keep));
    assert!(!red.phi.contains_key(&t));
}

#[test]
fn lie_flow_is_reversible() {
    let m = pt_small();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let nf = normal_form(m, 1.0, 100.0, 2, 3, 6).unwrap();
    let chi = &nf.rounds[0].chi;
    let z: Vec<C64> = (0..2).map(|_| rand_c(&mut rng, 0.05)).collect();
    let f: Vec<C64> = m.project_continuous(&gaussian(m)).into_iter().map(|v| v * 0.01).collect();
    let (z1, f1) = lie_flow(chi, &z, &f, 0.3, 1.0, 8, m);
    let (z2, f2) = lie_flow(chi, &z1, &f1, 0.3, -1.0, 8, m);
    assert!(rel_err(&z2, &z) < 1e-9);
    assert!(rel_err(&f2, &f) < 1e-9);
    // the flow moves the point at the expected order
    assert!(rel_err(&z1, &z) > 0.0);
    let phi1 = to_complex(&m.modes()[1]);
    assert_eq!(phi1.len(), f.len());
}
