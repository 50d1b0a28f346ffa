mod common;

use std::f64::consts::PI;
use std::sync::OnceLock;

use fgrnls::algebra::{Coupling, HamExpansion, HamTerm};
use fgrnls::birkhoff::{normal_form, reduce_to_minimal};
use fgrnls::fgr::{assemble_phi_w, build_packets, cancellation_at, fgr_form, lyapunov_balance, rayleigh_quotients, FgrMember, FgrPacket};
use fgrnls::resonance::{build_index_sets, resonance_budget, IndexTriple};
use fgrnls::spectral::{GridSpec, OperatorModel};
use fgrnls::{Error, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{c, mi, pt_small, rand_c, rel_err};

fn bump(model: &OperatorModel, x0: f64, k: f64) -> Vec<C64> {
    model.project_continuous(&model.grid().sample_complex(|x| C64::from_polar((-(x - x0) * (x - x0) / 2.0).exp(), k * x)))
}

fn member(m: i32, mu: &[u32], nu: &[u32], phi: Vec<C64>) -> FgrMember {
    FgrMember { triple: IndexTriple { m, mu: mi(mu), nu: mi(nu) }, phi: Coupling::new(phi) }
}

/// Packets of the default model on the coarse grid.
fn pt_packets() -> &'static Vec<FgrPacket> {
    static P: OnceLock<Vec<FgrPacket>> = OnceLock::new();
    P.get_or_init(|| {
        let m = pt_small();
        let b = resonance_budget(m.eigenvalues(), m.c()).unwrap();
        let cat = build_index_sets(m.eigenvalues(), m.c(), &b).unwrap();
        let nf = normal_form(m, 1.0, 100.0, b.n + 1, b.n + 2, 2 * b.n + 4).unwrap();
        let red = reduce_to_minimal(&nf, &cat, m).unwrap();
        build_packets(&cat, &red, m).unwrap()
    })
}

#[test]
fn assemble_trivial_cases() {
    let m = pt_small();
    let a = bump(m, 0.5, 0.0);
    let b = bump(m, -1.0, 0.3);
    let p = FgrPacket::new(m, 1.7, vec![member(1, &[0, 0], &[0, 1], a.clone())]).unwrap();
    let zero = vec![c(0.0, 0.0); 2];
    assert!(assemble_phi_w(&p, &zero).iter().all(|v| v.norm() == 0.0));
    assert!(rel_err(&assemble_phi_w(&p, &[c(0.3, 0.0), c(1.0, 0.0)]), &a) < 1e-15);

    // two members with the same detuning 1 + 0.7 - 0 = 2 * 0.7 + 1 - 0.7
    let two = FgrPacket::new(m, 1.7, vec![member(1, &[0, 0], &[0, 1], a.clone()), member(1, &[0, 1], &[0, 2], b.clone())]).unwrap();
    let zeta = [c(0.2, -0.1), c(0.4, 0.3)];
    let c1 = zeta[1].conj();
    let c2 = zeta[1] * zeta[1].conj() * zeta[1].conj();
    let naive: Vec<C64> = a.iter().zip(&b).map(|(x, y)| c1 * x + c2 * y).collect();
    assert!(rel_err(&assemble_phi_w(&two, &zeta), &naive) < 1e-14);
}

#[test]
fn packet_validation() {
    let m = pt_small();
    let a = bump(m, 0.0, 0.0);
    let err = FgrPacket::new(m, 0.5, vec![member(0, &[0, 0], &[0, 1], a.clone())]).unwrap_err();
    assert!(matches!(err, Error::Input(_)));
    let mixed = vec![member(1, &[0, 0], &[0, 1], a.clone()), member(0, &[0, 0], &[0, 1], a)];
    assert!(matches!(FgrPacket::new(m, 1.7, mixed), Err(Error::Input(_))));
}

#[test]
fn form_vanishes_at_the_origin() {
    let v = fgr_form(pt_packets(), &[c(0.0, 0.0); 2]).unwrap();
    assert_eq!(v.value, 0.0);
    assert_eq!(v.reference, 0.0);
    let empty = fgr_form(&[], &[c(1.0, 0.0); 2]).unwrap();
    assert_eq!(empty.value, 0.0);
}

#[test]
fn free_toy_packet() {
    // with V = 0, <delta(-d^2 - 1) g, g> for g = e^{-x^2/2} equals e^{-1}
    let free = OperatorModel::free(GridSpec::new(40.0, 2048).unwrap(), 0.0);
    let g = free.grid().sample_complex(|x| C64::new((-x * x / 2.0).exp(), 0.0));
    let p = FgrPacket::new(&free, 1.0, vec![member(1, &[0], &[1], g)]).unwrap();
    let zeta = [c(0.6, 0.8)];
    let v = fgr_form(&[p], &zeta).unwrap();
    let exact = (-1.0f64).exp();
    assert!((v.value - exact).abs() / exact < 1e-4, "{}", v.value);
    assert!((v.reference - 1.0).abs() < 1e-14);
}

#[test]
fn poschl_teller_quotient_is_positive() {
    let packets = pt_packets();
    assert!(!packets.is_empty());
    let r = rayleigh_quotients(packets, 2, &[0.01, 0.1], 200, 7).unwrap();
    assert!(r.holds);
    assert!(r.min_quotient > 0.0 && r.min_quotient <= r.max_quotient);
}

#[test]
fn cancellation_trivial_cases() {
    let m = pt_small();
    let z0 = HamExpansion::from_terms(vec![HamTerm::scalar(0, mi(&[1, 1]), mi(&[1, 1]), c(0.3, 0.0))], m.h());
    let zeta = [c(0.3, 0.2), c(-0.1, 0.5)];
    let r = cancellation_at(&z0, &[], &zeta, m);
    assert!(r.z0 < 1e-15);
    assert_eq!(r.principal_value, 0.0);
    assert_eq!(r.delta, 0.0);
}

#[test]
fn balance_of_the_zero_trajectory() {
    let times: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
    let zeta = vec![vec![c(0.0, 0.0); 2]; 20];
    let r = lyapunov_balance(&times, &zeta, pt_packets()).unwrap();
    assert!(r.residual.iter().all(|v| *v == 0.0));
    assert_eq!(r.max_drift, 0.0);
}

#[test]
fn balance_input_errors() {
    let zeta = vec![vec![c(0.1, 0.0); 2]; 4];
    assert!(matches!(lyapunov_balance(&[0.0, 0.1, 0.3, 0.4], &zeta, &[]), Err(Error::Input(_))));
    assert!(matches!(lyapunov_balance(&[0.0, 0.1], &zeta[..2], &[]), Err(Error::Input(_))));
    assert!(matches!(lyapunov_balance(&[0.0, 0.1, 0.2], &zeta, &[]), Err(Error::Input(_))));
}

#[test]
fn balance_on_an_exact_decay() {
    // one member zetabar_0 Phi: the form is g |zeta|^2 and |zeta|^2 / 2 decays at rate 2 pi g
    let m = pt_small();
    let p = FgrPacket::new(m, 1.4, vec![member(1, &[0, 0], &[1, 0], bump(m, 0.3, 0.2))]).unwrap();
    let g = p.gram_delta[0][0].re;
    assert!(g > 0.0);
    let dt = 1e-3;
    let times: Vec<f64> = (0..400).map(|k| k as f64 * dt).collect();
    let zeta: Vec<Vec<C64>> = times.iter().map(|t| vec![C64::from_polar((-PI * g * t).exp(), 0.4 * t), c(0.0, 0.0)]).collect();
    let r = lyapunov_balance(&times, &zeta, &[p]).unwrap();
    let peak = r.source.iter().cloned().fold(0.0, f64::max);
    assert!(r.residual.iter().all(|v| v.abs() < 1e-5 * peak));
    assert!(r.max_drift < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn form_is_phase_invariant(seed in 0u64..10_000, theta in 0.0f64..6.3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zeta: Vec<C64> = (0..2).map(|_| rand_c(&mut rng, 0.3)).collect();
        let turned: Vec<C64> = zeta.iter().map(|v| v * C64::from_polar(1.0, theta)).collect();
        let a = fgr_form(pt_packets(), &zeta).unwrap().value;
        let b = fgr_form(pt_packets(), &turned).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300));
    }

    #[test]
    fn form_is_nonnegative(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zeta: Vec<C64> = (0..2).map(|_| rand_c(&mut rng, 1.0)).collect();
        prop_assert!(fgr_form(pt_packets(), &zeta).unwrap().value >= -1e-8);
    }
}
