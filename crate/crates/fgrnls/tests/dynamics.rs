mod common;

use std::collections::BTreeMap;

use fgrnls::algebra::{HamExpansion, HamTerm, RealityReport};
use fgrnls::birkhoff::{normal_form, reduce_to_minimal, ReducedForm};
use fgrnls::dynamics::{
    energy, free_flow, simulate, simulate_from, wrap_time, GTransform, InitialData, Power, Radiation, ReducedOde, SimConfig, Sponge,
    Stepper, ZetaTransform,
};
use fgrnls::resonance::{build_index_sets, resonance_budget};
use fgrnls::spectral::{norm2, GridSpec, OperatorModel};
use fgrnls::{Error, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{c, mi, pt_small, rand_c, rel_err};

fn modes(a: [f64; 2], b: [f64; 2]) -> InitialData {
    InitialData::Modes {
        amplitudes: vec![a, b],
        radiation: Some(Radiation { amplitude: 0.03, center: -2.0, width: 1.2, momentum: 0.6 }),
    }
}

fn short(t_end: f64, dt: f64) -> SimConfig {
    SimConfig { t_end, dt, stride: 10, initial: modes([0.3, 0.0], [0.0, 0.2]), ..SimConfig::default() }
}

fn run(model: &OperatorModel, cfg: &SimConfig, u: &mut [C64], from: f64, steps: usize, dt: f64) {
    let s = Stepper::new(model, cfg, dt);
    for k in 0..steps {
        s.step(u, from + k as f64 * dt).unwrap();
    }
}

#[test]
fn zero_data_stays_zero() {
    let m = pt_small();
    let cfg = SimConfig { t_end: 1.0, initial: InitialData::Modes { amplitudes: vec![], radiation: None }, ..short(1.0, 1e-3) };
    let rec = simulate(m, &cfg, None).unwrap();
    assert!(rec.final_state.iter().all(|v| v.norm() == 0.0));
    assert_eq!(rec.samples.len(), 101);
}

#[test]
fn linear_step_matches_the_propagator() {
    let m = pt_small();
    let cfg = SimConfig { gamma0: 0.0, gamma1: 0.0, ..short(2.0, 1e-3) };
    let u0 = cfg.initial.build(m).unwrap();
    let mut u = u0.clone();
    run(m, &cfg, &mut u, 0.0, 2000, 1e-3);
    assert!(rel_err(&u, &m.propagate(2.0, &u0)) < 1e-6, "{:.3e}", rel_err(&u, &m.propagate(2.0, &u0)));
}

#[test]
fn free_gaussian_spreads_exactly() {
    // e^{-x^2/2} evolves to e^{-x^2 / (2 (1 + 2 i t))} / sqrt(1 + 2 i t)
    let grid = GridSpec::new(40.0, 512).unwrap();
    let free = OperatorModel::free(grid, 0.0);
    let u0 = grid.sample_complex(|x| C64::new((-x * x / 2.0).exp(), 0.0));
    let t = 1.5;
    let s = C64::new(1.0, 2.0 * t);
    let want = grid.sample_complex(|x| (-(x * x) / (2.0 * s)).exp() / s.sqrt());
    assert!(rel_err(&free_flow(&free, t, &u0), &want) < 1e-10);
}

#[test]
fn cubic_flow_conserves_mass() {
    let m = pt_small();
    let rec = simulate(m, &short(5.0, 1e-3), None).unwrap();
    assert!(rec.max_mass_drift() < 1e-10, "{:.3e}", rec.max_mass_drift());
}

#[test]
fn autonomous_flow_conserves_energy() {
    let m = pt_small();
    let cfg = SimConfig { gamma1: 0.0, ..short(5.0, 1e-3) };
    let rec = simulate(m, &cfg, None).unwrap();
    assert!(rec.max_energy_drift() < 1e-6, "{:.3e}", rec.max_energy_drift());
    let quintic = SimConfig { power: Power::Quintic, ..cfg };
    let rec = simulate(m, &quintic, None).unwrap();
    assert!(rec.max_energy_drift() < 1e-6, "{:.3e}", rec.max_energy_drift());
}

#[test]
fn splitting_is_time_reversible() {
    let m = pt_small();
    let cfg = short(1.0, 1e-3);
    let u0 = cfg.initial.build(m).unwrap();
    let mut u = u0.clone();
    run(m, &cfg, &mut u, 0.0, 1000, 1e-3);
    run(m, &cfg, &mut u, 1.0, 1000, -1e-3);
    assert!(rel_err(&u, &u0) < 1e-10, "{:.3e}", rel_err(&u, &u0));
}

#[test]
fn splitting_is_second_order() {
    let m = pt_small();
    let cfg = short(1.0, 1e-2);
    let u0 = cfg.initial.build(m).unwrap();
    let at = |dt: f64| {
        let mut u = u0.clone();
        run(m, &cfg, &mut u, 0.0, (1.0 / dt).round() as usize, dt);
        u
    };
    let (a, b, r) = (at(0.02), at(0.01), at(0.0025));
    let e1 = rel_err(&a, &r);
    let e2 = rel_err(&b, &r);
    // with the reference at dt/4 the ratio is (4 - 1/4) / (1 - 1/16) = 4
    let ratio = e1 / e2;
    assert!((3.5..4.5).contains(&ratio), "{ratio}");
}

#[test]
fn sponge_only_removes_mass() {
    let m = pt_small();
    let cfg = SimConfig {
        sponge: Some(Sponge { start: 10.0, strength: 1.0 }),
        initial: InitialData::Modes { amplitudes: vec![], radiation: Some(Radiation { amplitude: 0.1, center: 0.0, width: 1.0, momentum: 2.0 }) },
        ..short(10.0, 1e-3)
    };
    let rec = simulate(m, &cfg, None).unwrap();
    assert!(rec.samples.windows(2).all(|w| w[1].mass <= w[0].mass + 1e-14));
    assert!(rec.samples.last().unwrap().mass < 0.5 * rec.samples[0].mass);
}

#[test]
fn config_validation() {
    let m = pt_small();
    let bad = [
        SimConfig { dt: 0.0, ..SimConfig::default() },
        SimConfig { t_end: -1.0, ..SimConfig::default() },
        SimConfig { stride: 0, ..SimConfig::default() },
        SimConfig { strichartz: vec![(0.5, 2.0)], ..SimConfig::default() },
        SimConfig { sponge: Some(Sponge { start: 0.0, strength: 1.0 }), ..SimConfig::default() },
        SimConfig { initial: InitialData::Modes { amplitudes: vec![[0.1, 0.0]; 3], radiation: None }, ..SimConfig::default() },
    ];
    for cfg in &bad {
        assert!(matches!(simulate(m, cfg, None), Err(Error::Config(_))), "{cfg:?}");
    }
    let wrong = vec![c(0.0, 0.0); 10];
    assert!(simulate_from(m, &short(1.0, 1e-3), None, wrong).is_err());
}

#[test]
fn wrap_time_shrinks_with_frequency() {
    let m = pt_small();
    assert!(wrap_time(m, m.c()).is_none());
    let a = wrap_time(m, 1.7).unwrap();
    let b = wrap_time(m, 3.0).unwrap();
    assert!(a > b && b > 0.0);
    let cfg = SimConfig { max_frequency: Some(1.7), ..short(a + 1.0, 1e-2) };
    assert!(simulate(m, &cfg, None).unwrap().beyond_wrap);
}

#[test]
fn monitor_accumulators_grow() {
    let m = pt_small();
    let a = simulate(m, &short(2.0, 1e-3), None).unwrap();
    let b = simulate(m, &short(4.0, 1e-3), None).unwrap();
    for (x, y) in a.strichartz.iter().zip(&b.strichartz) {
        assert!(y.2 >= x.2 - 1e-15);
    }
    assert!(b.f_l2_weighted >= a.f_l2_weighted);
    let inc = b.profile_increments(m.h());
    assert!(inc.iter().all(|x| x.2 >= 0.0 && x.1 > x.0));
}

fn pt_reduced() -> (fgrnls::resonance::ResonanceCatalog, ReducedForm) {
    let m = pt_small();
    let b = resonance_budget(m.eigenvalues(), m.c()).unwrap();
    let cat = build_index_sets(m.eigenvalues(), m.c(), &b).unwrap();
    let nf = normal_form(m, 1.0, 100.0, b.n + 1, b.n + 2, 2 * b.n + 4).unwrap();
    let red = reduce_to_minimal(&nf, &cat, m).unwrap();
    (cat, red)
}

#[test]
fn new_variables_at_zero_amplitude() {
    let m = pt_small();
    let (cat, red) = pt_reduced();
    let zeta = ZetaTransform::new(&cat, &red, m).unwrap();
    let g = GTransform::new(&cat, &red, m).unwrap();
    assert!(!zeta.is_empty());
    let zero = vec![c(0.0, 0.0); 2];
    assert!(zeta.apply(&zero, 0.4).unwrap().iter().all(|v| v.norm() == 0.0));
    let f = m.project_continuous(&m.grid().sample_complex(|x| C64::new((-x * x).exp(), 0.0)));
    assert_eq!(g.apply(&zero, &f, 0.4), f);

    // zeta - z is at least quadratic in z
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let z: Vec<C64> = (0..2).map(|_| rand_c(&mut rng, 1.0)).collect();
    let gap = |e: f64| {
        let ze: Vec<C64> = z.iter().map(|v| v * e).collect();
        let out = zeta.apply(&ze, 0.4).unwrap();
        rel_err(&out, &ze) * e
    };
    let ratio = gap(2e-3) / gap(1e-3);
    assert!(ratio > 3.5, "{ratio}");
}

#[test]
fn reduced_ode_examples() {
    let m = pt_small();
    let l = m.eigenvalues().to_vec();
    let empty = ReducedForm {
        z0: HamExpansion::new(),
        z1: HamExpansion::new(),
        rest: HamExpansion::new(),
        phi: BTreeMap::new(),
        psi: BTreeMap::new(),
        reality: RealityReport { real: true, first_violation: None },
        displaced: 0,
    };
    let f = vec![c(0.0, 0.0); m.grid().points];
    let zero = ReducedOde::new(&empty, &l, m);
    assert!(zero.rhs(&[c(0.0, 0.0); 2], &f, 0.0).iter().all(|v| v.norm() == 0.0));

    // Z_0 = a |z_0|^4 gives zdot_0 = -i (lambda_0 z_0 + 2 a |z_0|^2 z_0)
    let a = 0.7;
    let quartic = ReducedForm { z0: HamExpansion::from_terms(vec![HamTerm::scalar(0, mi(&[2, 0]), mi(&[2, 0]), c(a, 0.0))], m.h()), ..empty };
    let ode = ReducedOde::new(&quartic, &l, m);
    let z = [c(0.3, -0.2), c(0.1, 0.4)];
    let r = ode.rhs(&z, &f, 0.0);
    let i = c(0.0, 1.0);
    let want0 = -i * (z[0] * l[0] + z[0] * z[0].norm_sqr() * 2.0 * a);
    let want1 = -i * z[1] * l[1];
    assert!((r[0] - want0).norm() < 1e-15);
    assert!((r[1] - want1).norm() < 1e-15);

    // |z_0| is conserved and the phase turns at rate 2 a |z_0|^2
    let traj = ode.integrate(&z, &f, 0.0, 1e-3, 1000, 1000);
    let (t, zt) = traj.last().unwrap();
    let exact = z[0] * C64::from_polar(1.0, -2.0 * a * z[0].norm_sqr() * t);
    assert!((zt[0] - exact).norm() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn mass_is_conserved_for_random_data(a in -0.4f64..0.4, b in -0.4f64..0.4, k in -1.0f64..1.0) {
        let m = pt_small();
        let cfg = SimConfig {
            initial: InitialData::Modes {
                amplitudes: vec![[a, 0.1], [0.0, b]],
                radiation: Some(Radiation { amplitude: 0.05, center: 1.0, width: 1.0, momentum: k }),
            },
            ..short(1.0, 1e-3)
        };
        let rec = simulate(m, &cfg, None).unwrap();
        prop_assert!(rec.max_mass_drift() < 1e-11);
        let u = &rec.final_state;
        prop_assert!((norm2(m.h(), u) - rec.samples[0].mass).abs() < 1e-11);
        prop_assert!(energy(m, u, cfg.gamma(1.0), cfg.power).is_finite());
    }
}
