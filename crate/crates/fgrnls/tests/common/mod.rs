#![allow(dead_code)]

use std::sync::OnceLock;

use fgrnls::algebra::MultiIndex;
use fgrnls::spectral::{build_operator, GridSpec, OperatorModel, PotentialPreset};
use fgrnls::C64;
use rand::Rng;

/// Default Poschl-Teller model on the full desk grid (L = 40, 2048 points).
pub fn pt_model() -> &'static OperatorModel {
    static M: OnceLock<OperatorModel> = OnceLock::new();
    M.get_or_init(|| build_operator(GridSpec::new(40.0, 2048).unwrap(), &PotentialPreset::default(), None).unwrap())
}

/// Same potential on a coarse grid, for tests that do not need the fine one.
pub fn pt_small() -> &'static OperatorModel {
    static M: OnceLock<OperatorModel> = OnceLock::new();
    M.get_or_init(|| build_operator(GridSpec::new(40.0, 512).unwrap(), &PotentialPreset::default(), None).unwrap())
}

pub fn mi(v: &[u32]) -> MultiIndex {
    MultiIndex::from_slice(v)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn rand_c<R: Rng>(rng: &mut R, scale: f64) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
}

pub fn rel_err(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// `z^mu zbar^nu` over independent arguments.
pub fn mono(mu: &MultiIndex, nu: &MultiIndex, z: &[C64], zbar: &[C64]) -> C64 {
    let mut p = C64::new(1.0, 0.0);
    for j in 0..z.len() {
        p *= z[j].powu(mu.0[j]) * zbar[j].powu(nu.0[j]);
    }
    p
}
