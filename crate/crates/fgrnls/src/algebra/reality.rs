use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::expansion::{HamExpansion, KindKey, TermKey};
use super::term::{evaluate_composite, Point, PointBuf, TermKind};
use super::MultiIndex;
use crate::spectral::OperatorModel;

const TOL: f64 = 1e-12;

/// Random evaluation point with independent `z`, `zbar`, `f`, `fbar`.
pub fn random_point<R: Rng>(model: &OperatorModel, n_modes: usize, scale: f64, rng: &mut R) -> PointBuf {
    let mut z = || -> Vec<C64> {
        (0..n_modes).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale).collect()
    };
    let (zz, zb) = (z(), z());
    let f: Vec<C64> = random_field(model, rng).into_iter().map(|v| v * scale).collect();
    let fbar: Vec<C64> = random_field(model, rng).into_iter().map(|v| v * scale).collect();
    PointBuf { t: rng.gen_range(0.0..std::f64::consts::TAU), z: zz, zbar: zb, f, fbar }
}

#[derive(Clone, Debug, Serialize)]
pub struct RealityReport {
    pub real: bool,
    pub first_violation: Option<String>,
}

type Shape = (i32, MultiIndex, MultiIndex, u32, u32);

/// Smooth random grid vector: a few modulated Gaussian bumps near the origin.
pub fn random_field<R: Rng>(model: &OperatorModel, rng: &mut R) -> Vec<C64> {
    let grid = model.grid();
    let bumps: Vec<(f64, C64, f64)> = (0..4)
        .map(|_| {
            let x0 = rng.gen_range(-0.3..0.3) * grid.half_length;
            let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let k = rng.gen_range(-2.0..2.0);
            (x0, c, k)
        })
        .collect();
    grid.sample_complex(|x| {
        bumps
            .iter()
            .map(|&(x0, c, k)| c * (-(x - x0) * (x - x0) / 4.0).exp() * C64::from_polar(1.0, k * x))
            .sum()
    })
}

/// Checks that every term has its mirror `(m, mu, nu) -> (-m, nu, mu)` with conjugate data.
///
/// Scalar and linear terms are matched by key; composite terms are compared as
/// multilinear functions of `(f, fbar)` at seeded random arguments.
pub fn check_reality(hexp: &HamExpansion, model: &OperatorModel) -> RealityReport {
    let mut index: BTreeMap<TermKey, usize> = BTreeMap::new();
    let mut groups: BTreeMap<Shape, Vec<usize>> = BTreeMap::new();
    for (i, t) in hexp.terms().iter().enumerate() {
        if let TermKind::Composite(c) = &t.kind {
            groups.entry((t.m, t.mu.clone(), t.nu.clone(), c.f_degree(), c.fbar_degree())).or_default().push(i);
        } else {
            index.insert(TermKey::of(t), i);
        }
    }
    let fail = |msg: String| RealityReport { real: false, first_violation: Some(msg) };
    for t in hexp.terms() {
        let mirror_kind = match &t.kind {
            TermKind::Scalar(_) => KindKey::Scalar,
            TermKind::LinearF(_) => KindKey::LinearFbar,
            TermKind::LinearFbar(_) => KindKey::LinearF,
            TermKind::Composite(_) => continue,
        };
        let key = TermKey { m: -t.m, mu: t.nu.clone(), nu: t.mu.clone(), kind: mirror_kind };
        let Some(&j) = index.get(&key) else {
            return fail(format!("no mirror for term (m={}, mu={:?}, nu={:?})", t.m, t.mu, t.nu));
        };
        let other = &hexp.terms()[j];
        let ok = match (&t.kind, &other.kind) {
            (TermKind::Scalar(a), TermKind::Scalar(b)) => (a - b.conj()).norm() <= TOL * a.norm().max(b.norm()).max(1e-300),
            (TermKind::LinearF(a), TermKind::LinearFbar(b)) | (TermKind::LinearFbar(a), TermKind::LinearF(b)) => {
                let diff: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y.conj()).norm_sqr()).sum::<f64>().sqrt();
                let scale = a.l2_norm(1.0).max(b.l2_norm(1.0));
                diff <= TOL * scale
            }
            _ => false,
        };
        if !ok {
            return fail(format!("mirror data mismatch for term (m={}, mu={:?}, nu={:?})", t.m, t.mu, t.nu));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let samples: Vec<(Vec<C64>, Vec<C64>)> = (0..3).map(|_| (random_field(model, &mut rng), random_field(model, &mut rng))).collect();
    let zeros = vec![C64::new(0.0, 0.0); hexp.terms().first().map(|t| t.n_modes()).unwrap_or(0)];
    let group_value = |idx: &[usize], f: &[C64], g: &[C64]| -> (C64, f64) {
        let p = Point { t: 0.0, z: &zeros, zbar: &zeros, f, fbar: g };
        let mut s = C64::new(0.0, 0.0);
        let mut a = 0.0;
        for &i in idx {
            if let TermKind::Composite(c) = &hexp.terms()[i].kind {
                let v = evaluate_composite(c, &p, model);
                s += v;
                a += v.norm();
            }
        }
        (s, a)
    };
    let empty = Vec::new();
    for (shape, idx) in &groups {
        let (m, mu, nu, p, q) = shape;
        let mirror: Shape = (-m, nu.clone(), mu.clone(), *q, *p);
        let midx = groups.get(&mirror).unwrap_or(&empty);
        for (f, g) in &samples {
            let cf: Vec<C64> = f.iter().map(|v| v.conj()).collect();
            let cg: Vec<C64> = g.iter().map(|v| v.conj()).collect();
            let (a, sa) = group_value(idx, f, g);
            let (b, sb) = group_value(midx, &cg, &cf);
            if (a - b.conj()).norm() > TOL * (sa + sb) + 1e-300 {
                return fail(format!(
                    "composite group (m={m}, mu={mu:?}, nu={nu:?}, deg=({p},{q})) has no conjugate mirror (|diff| = {:.3e})",
                    (a - b.conj()).norm()
                ));
            }
        }
    }
    RealityReport { real: true, first_violation: None }
}
