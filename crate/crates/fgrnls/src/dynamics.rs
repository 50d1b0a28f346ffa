//! Split-step integration of the forced equation with mode and radiation tracking.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::algebra::{gradient_zbar, HamExpansion, MultiIndex, PointBuf};
use crate::birkhoff::{lie_flow, NormalForm, ReducedForm};
use crate::error::{Error, Result};
use crate::fgr::{build_packets, FgrPacket};
use crate::resonance::{IndexTriple, ResonanceCatalog, TOL_RES};
use crate::spectral::{norm2, outgoing_resolvent, pair, OperatorModel};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Power {
    /// `gamma |u|^2 u`.
    #[default]
    Cubic,
    /// `gamma |u|^4 u`.
    Quintic,
}

impl Power {
    fn exponent(self) -> i32 {
        match self {
            Power::Cubic => 1,
            Power::Quintic => 2,
        }
    }
}

/// Gaussian radiation packet `a exp(-(x - x0)^2 / (2 w^2) + i k x)`, projected onto the continuum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Radiation {
    pub amplitude: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default = "one")]
    pub width: f64,
    #[serde(default)]
    pub momentum: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// `sum_j z_j phi_j + P_c(radiation)`; amplitudes as `[re, im]`.
    Modes {
        amplitudes: Vec<[f64; 2]>,
        #[serde(default)]
        radiation: Option<Radiation>,
    },
    /// Raw grid samples as `[re, im]`.
    Grid { values: Vec<[f64; 2]> },
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::Modes { amplitudes: vec![[0.05, 0.0]], radiation: None }
    }
}

impl InitialData {
    pub fn build(&self, model: &OperatorModel) -> Result<Vec<C64>> {
        match self {
            InitialData::Grid { values } => {
                let u: Vec<C64> = values.iter().map(|v| C64::new(v[0], v[1])).collect();
                model.check_grid(&u)?;
                Ok(u)
            }
            InitialData::Modes { amplitudes, radiation } => {
                if amplitudes.len() > model.eigenvalues().len() {
                    return Err(Error::Config(format!(
                        "{} mode amplitudes for {} bound states",
                        amplitudes.len(),
                        model.eigenvalues().len()
                    )));
                }
                let mut u = match radiation {
                    None => vec![C64::new(0.0, 0.0); model.grid().points],
                    Some(r) => {
                        if !(r.width > 0.0) {
                            return Err(Error::Config("radiation width must be positive".into()));
                        }
                        let g = model.grid().sample_complex(|x| {
                            let y = (x - r.center) / r.width;
                            C64::from_polar(r.amplitude * (-0.5 * y * y).exp(), r.momentum * x)
                        });
                        model.project_continuous(&g)
                    }
                };
                for (a, phi) in amplitudes.iter().zip(model.modes()) {
                    let z = C64::new(a[0], a[1]);
                    for i in 0..u.len() {
                        u[i] += z * phi[i];
                    }
                }
                Ok(u)
            }
        }
    }
}

/// Absorbing layer `exp(-strength ((|x| - start) / (L - start))^2 dt)` beyond `start`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sponge {
    pub start: f64,
    pub strength: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub gamma0: f64,
    pub gamma1: f64,
    pub power: Power,
    pub initial: InitialData,
    pub t_end: f64,
    pub dt: f64,
    /// Steps between recorded samples.
    pub stride: usize,
    pub sponge: Option<Sponge>,
    /// `(r, p)` pairs for the running `L^r_t L^p_x` norms; `r = inf` is a running max.
    pub strichartz: Vec<(f64, f64)>,
    /// Weight exponent `S` in `L^{2,-S}`.
    pub weight: f64,
    /// Largest frequency radiated, for the wrap-around time.
    pub max_frequency: Option<f64>,
    /// Number of dyadic profile snapshots `t = t_end / 2^k`.
    pub snapshots: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            gamma0: 1.0,
            gamma1: 100.0,
            power: Power::Cubic,
            initial: InitialData::default(),
            t_end: 200.0,
            dt: 1e-3,
            stride: 100,
            sponge: None,
            strichartz: vec![(f64::INFINITY, 2.0), (4.0, f64::INFINITY), (8.0, 4.0)],
            weight: 2.0,
            max_frequency: None,
            snapshots: 6,
        }
    }
}

impl SimConfig {
    pub fn gamma(&self, t: f64) -> f64 {
        self.gamma0 + self.gamma1 * t.cos()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("t_end = {} must be non-negative", self.t_end)));
        }
        if self.stride == 0 {
            return Err(Error::Config("stride must be at least 1".into()));
        }
        for &(r, p) in &self.strichartz {
            if !(r >= 1.0) || !(p >= 1.0) {
                return Err(Error::Config(format!("Strichartz pair ({r}, {p}) needs exponents >= 1")));
            }
        }
        if let Some(s) = &self.sponge {
            if !(s.start > 0.0) || !(s.strength >= 0.0) {
                return Err(Error::Config("sponge needs start > 0 and strength >= 0".into()));
            }
        }
        Ok(())
    }
}

/// Precomputed split-step factors.
pub struct Stepper<'a> {
    model: &'a OperatorModel,
    kinetic_half: Vec<C64>,
    pot: Vec<f64>,
    sponge: Option<Vec<f64>>,
    power: Power,
    gamma0: f64,
    gamma1: f64,
    dt: f64,
    /// `dt (pi / h)^2`: phase of the highest Fourier mode per step.
    pub stiffness: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a OperatorModel, cfg: &SimConfig, dt: f64) -> Stepper<'a> {
        let four = model.fourier();
        let kinetic_half = four.k2.iter().map(|&k2| C64::from_polar(1.0, -k2 * dt / 2.0)).collect();
        let pot = model.potential().iter().map(|v| v + model.c()).collect();
        let grid = model.grid();
        let sponge = cfg.sponge.as_ref().map(|s| {
            let span = (grid.half_length - s.start).max(f64::MIN_POSITIVE);
            grid.coords()
                .iter()
                .map(|&x| {
                    let y = ((x.abs() - s.start) / span).max(0.0);
                    (-s.strength * y * y * dt.abs()).exp()
                })
                .collect()
        });
        let kmax = std::f64::consts::PI / model.h();
        Stepper {
            model,
            kinetic_half,
            pot,
            sponge,
            power: cfg.power,
            gamma0: cfg.gamma0,
            gamma1: cfg.gamma1,
            dt,
            stiffness: dt.abs() * kmax * kmax,
        }
    }

    /// One Strang step from `t` to `t + dt`.
    pub fn step(&self, u: &mut [C64], t: f64) -> Result<()> {
        let four = self.model.fourier();
        four.forward(u);
        for (v, k) in u.iter_mut().zip(&self.kinetic_half) {
            *v *= k;
        }
        four.inverse(u);
        let g = self.gamma0 + self.gamma1 * (t + self.dt / 2.0).cos();
        let p = self.power.exponent();
        for (v, &w) in u.iter_mut().zip(&self.pot) {
            let a = v.norm_sqr().powi(p);
            *v *= C64::from_polar(1.0, -(w + g * a) * self.dt);
        }
        if let Some(s) = &self.sponge {
            for (v, d) in u.iter_mut().zip(s) {
                *v *= d;
            }
        }
        four.forward(u);
        for (v, k) in u.iter_mut().zip(&self.kinetic_half) {
            *v *= k;
        }
        four.inverse(u);
        if u.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numerical(format!("non-finite field at t = {:.6}", t + self.dt)));
        }
        Ok(())
    }
}

/// `int |u_x|^2 + (V + c)|u|^2 + gamma/(p+1) |u|^{2p+2}` with `p = 1` cubic, `p = 2` quintic.
pub fn energy(model: &OperatorModel, u: &[C64], gamma: f64, power: Power) -> f64 {
    let h = model.h();
    let hu = model.apply(u);
    let quad: f64 = u.iter().zip(&hu).map(|(a, b)| (a.conj() * b).re).sum::<f64>() * h;
    let p = power.exponent();
    let nl: f64 = u.iter().map(|v| v.norm_sqr().powi(p + 1)).sum::<f64>() * h;
    quad + gamma / (p + 1) as f64 * nl
}

/// `||u||_{H^1}` from the spectral derivative.
pub fn h1_norm(model: &OperatorModel, u: &[C64]) -> f64 {
    let h = model.h();
    let du = model.fourier().derivative(u);
    (norm2(h, u).powi(2) + norm2(h, &du).powi(2)).sqrt()
}

/// `||<x>^{-s} u||_2`.
pub fn weighted_norm(model: &OperatorModel, u: &[C64], s: f64) -> f64 {
    let h = model.h();
    let x = model.grid().coords();
    (u.iter().zip(&x).map(|(v, &x)| v.norm_sqr() * (1.0 + x * x).powf(-s)).sum::<f64>() * h).sqrt()
}

fn lp_norm(h: f64, u: &[C64], p: f64) -> f64 {
    if p.is_infinite() {
        u.iter().map(|v| v.norm()).fold(0.0, f64::max)
    } else {
        (u.iter().map(|v| v.norm().powf(p)).sum::<f64>() * h).powf(1.0 / p)
    }
}

/// `exp(-i t (-Delta + c)) u`.
pub fn free_flow(model: &OperatorModel, t: f64, u: &[C64]) -> Vec<C64> {
    let four = model.fourier();
    let c = model.c();
    let mut w = u.to_vec();
    four.apply_symbol(&mut w, |n| C64::from_polar(1.0, -(four.k2[n] + c) * t));
    w
}

/// Correction sums turning `z` into `zeta`.
#[derive(Clone, Debug)]
pub struct ZetaTransform {
    n_modes: usize,
    terms: Vec<ZetaTerm>,
}

#[derive(Clone, Debug)]
struct ZetaTerm {
    m: i32,
    up: MultiIndex,
    down: MultiIndex,
    /// Exponents selecting the `nu_j` prefactor.
    nu: MultiIndex,
    coeff: C64,
}

impl ZetaTransform {
    pub fn new(catalog: &ResonanceCatalog, reduced: &ReducedForm, model: &OperatorModel) -> Result<ZetaTransform> {
        let lambda = &catalog.lambda;
        let h = model.h();
        let resolved = resolved_psi(catalog, reduced, model)?;
        let mut terms = Vec::new();
        for (a, phi) in &reduced.phi {
            for (b, rpsi) in &resolved {
                let up = a.mu.add(&b.mu);
                let down = a.nu.add(&b.nu);
                let denom = (a.m + b.m) as f64 - up.freq_diff(&down, lambda);
                if (a.m + b.m) == 0 && denom.abs() <= TOL_RES {
                    continue;
                }
                if denom.abs() <= TOL_RES {
                    return Err(Error::Hypothesis(format!("vanishing denominator for {a:?} x {b:?}")));
                }
                let coeff = pair(h, rpsi, phi.data()) / denom;
                terms.push(ZetaTerm { m: a.m + b.m, up, down, nu: a.nu.clone(), coeff });
            }
        }
        for (a, psi) in &reduced.psi {
            for (b, rpsi) in &resolved {
                let up = a.mu.add(&b.nu);
                let down = a.nu.add(&b.mu);
                let denom = (a.m - b.m) as f64 - up.freq_diff(&down, lambda);
                if a.m == b.m && denom.abs() <= TOL_RES {
                    continue;
                }
                if denom.abs() <= TOL_RES {
                    return Err(Error::Hypothesis(format!("vanishing denominator for {a:?} x {b:?}")));
                }
                // R^- conj(Psi) = conj(R^+ Psi)
                let rm: Vec<C64> = rpsi.iter().map(|v| v.conj()).collect();
                let coeff = pair(h, &rm, psi.data()) / denom;
                terms.push(ZetaTerm { m: a.m - b.m, up, down, nu: a.nu.clone(), coeff });
            }
        }
        Ok(ZetaTransform { n_modes: lambda.len(), terms })
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// `zeta(z, t)`.
    pub fn apply(&self, z: &[C64], t: f64) -> Result<Vec<C64>> {
        if z.len() != self.n_modes {
            return Err(Error::Input(format!("{} amplitudes for {} modes", z.len(), self.n_modes)));
        }
        let zb: Vec<C64> = z.iter().map(|v| v.conj()).collect();
        let mut zeta = z.to_vec();
        for term in &self.terms {
            let base = C64::from_polar(1.0, term.m as f64 * t) * term.coeff * term.up.monomial(z);
            for (j, zj) in zeta.iter_mut().enumerate() {
                let k = term.nu.get(j);
                if k == 0 {
                    continue;
                }
                // the division by zbar_j is absorbed into the exponent
                *zj -= base * k as f64 * term.down.lower(j).monomial(&zb);
            }
        }
        Ok(zeta)
    }
}

fn resolved_psi(catalog: &ResonanceCatalog, reduced: &ReducedForm, model: &OperatorModel) -> Result<Vec<(IndexTriple, Vec<C64>)>> {
    let mut out = Vec::with_capacity(reduced.psi.len());
    for (t, psi) in &reduced.psi {
        let arg = t.detuning(&catalog.lambda);
        if arg <= catalog.c {
            return Err(Error::Numerical(format!("resolvent argument {arg} for {t:?} is not above the threshold")));
        }
        out.push((t.clone(), outgoing_resolvent(model, C64::new(arg, 0.0), psi.data())?));
    }
    Ok(out)
}

/// `g = f + sum_{M'} e^{i m t} z^mu zbar^nu R^+(lambda.(mu - nu) - m) Psi`.
#[derive(Clone, Debug)]
pub struct GTransform {
    terms: Vec<(IndexTriple, Vec<C64>)>,
}

impl GTransform {
    pub fn new(catalog: &ResonanceCatalog, reduced: &ReducedForm, model: &OperatorModel) -> Result<GTransform> {
        Ok(GTransform { terms: resolved_psi(catalog, reduced, model)? })
    }

    pub fn apply(&self, z: &[C64], f: &[C64], t: f64) -> Vec<C64> {
        let zb: Vec<C64> = z.iter().map(|v| v.conj()).collect();
        let mut g = f.to_vec();
        for (tr, v) in &self.terms {
            let c = C64::from_polar(1.0, tr.m as f64 * t) * tr.mu.monomial(z) * tr.nu.monomial(&zb);
            for (o, x) in g.iter_mut().zip(v) {
                *o += c * x;
            }
        }
        g
    }
}

/// Right side of the reduced mode equation: `zdot_j = -i (lambda_j z_j + d_{zbar_j}(Z_0 + Z_1))`.
pub struct ReducedOde<'a> {
    model: &'a OperatorModel,
    lambda: Vec<f64>,
    grads: Vec<HamExpansion>,
}

impl<'a> ReducedOde<'a> {
    pub fn new(reduced: &ReducedForm, lambda: &[f64], model: &'a OperatorModel) -> ReducedOde<'a> {
        let h = model.h();
        let zz = reduced.z0.plus(&reduced.z1, h);
        let grads = (0..lambda.len()).map(|j| gradient_zbar(&zz, j, h)).collect();
        ReducedOde { model, lambda: lambda.to_vec(), grads }
    }

    pub fn rhs(&self, z: &[C64], f: &[C64], t: f64) -> Vec<C64> {
        let p = PointBuf::physical(t, z, f);
        let v = p.view();
        self.grads
            .iter()
            .enumerate()
            .map(|(j, g)| -I * (z[j] * self.lambda[j] + g.evaluate(&v, self.model)))
            .collect()
    }

    /// RK4 with `f` frozen; returns the state at each multiple of `stride` steps.
    pub fn integrate(&self, z0: &[C64], f: &[C64], t0: f64, dt: f64, steps: usize, stride: usize) -> Vec<(f64, Vec<C64>)> {
        let mut z = z0.to_vec();
        let mut out = vec![(t0, z.clone())];
        let ax = |z: &[C64], k: &[C64], a: f64| -> Vec<C64> { z.iter().zip(k).map(|(x, y)| x + y * a).collect() };
        for s in 0..steps {
            let t = t0 + s as f64 * dt;
            let k1 = self.rhs(&z, f, t);
            let k2 = self.rhs(&ax(&z, &k1, dt / 2.0), f, t + dt / 2.0);
            let k3 = self.rhs(&ax(&z, &k2, dt / 2.0), f, t + dt / 2.0);
            let k4 = self.rhs(&ax(&z, &k3, dt), f, t + dt);
            for i in 0..z.len() {
                z[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
            }
            if (s + 1) % stride.max(1) == 0 {
                out.push((t0 + (s + 1) as f64 * dt, z.clone()));
            }
        }
        out
    }
}

/// Everything needed to map physical samples to normal-form and `zeta` variables.
pub struct FgrFrame {
    pub generators: Vec<HamExpansion>,
    pub zeta: ZetaTransform,
    pub g: GTransform,
    pub packets: Vec<FgrPacket>,
    pub minimal: Vec<IndexTriple>,
    /// RK4 steps per unit flow time in the coordinate change.
    pub flow_steps: usize,
}

impl FgrFrame {
    pub fn build(catalog: &ResonanceCatalog, nf: &NormalForm, reduced: &ReducedForm, model: &OperatorModel, flow_steps: usize) -> Result<FgrFrame> {
        Ok(FgrFrame {
            generators: nf.generators().into_iter().cloned().collect(),
            zeta: ZetaTransform::new(catalog, reduced, model)?,
            g: GTransform::new(catalog, reduced, model)?,
            packets: build_packets(catalog, reduced, model)?,
            minimal: catalog.minimal.clone(),
            flow_steps,
        })
    }

    /// Normal-form coordinates of a physical state.
    pub fn normal_coordinates(&self, z: &[C64], f: &[C64], t: f64, model: &OperatorModel) -> (Vec<C64>, Vec<C64>) {
        let (mut z, mut f) = (z.to_vec(), f.to_vec());
        for chi in &self.generators {
            (z, f) = lie_flow(chi, &z, &f, t, -1.0, self.flow_steps, model);
        }
        (z, f)
    }
}

/// One recorded sample.
#[derive(Clone, Debug, Serialize)]
pub struct Sample {
    pub t: f64,
    pub z: Vec<C64>,
    /// Normal-form amplitudes, when a frame is supplied.
    pub z_normal: Option<Vec<C64>>,
    pub zeta: Option<Vec<C64>>,
    pub mass: f64,
    pub energy: f64,
    pub f_l2: f64,
    pub f_h1: f64,
    pub f_weighted: f64,
    pub g_weighted: Option<f64>,
    /// `pi sum_w` delta-form at `zeta`.
    pub fgr_source: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryRecord {
    pub samples: Vec<Sample>,
    /// `||u_0||_{H^1}`.
    pub epsilon: f64,
    pub stiffness: f64,
    pub t_wrap: Option<f64>,
    /// Set when an unabsorbed run outlives the wrap-around time.
    pub beyond_wrap: bool,
    /// Running `(r, p, ||f||_{L^r_t L^p_x})`.
    pub strichartz: Vec<(f64, f64, f64)>,
    /// Running `int |z^{mu+nu}|^2 dt` per minimal triple.
    pub resonant_l2: BTreeMap<String, f64>,
    /// Running `int ||g||^2_{L^{2,-S}} dt` and its `f` baseline.
    pub g_l2: Option<f64>,
    pub f_l2_weighted: f64,
    /// `(t, exp(i t (-Delta + c)) u(t))` at dyadic times.
    pub profiles: Vec<(f64, Vec<C64>)>,
    pub final_state: Vec<C64>,
}

impl TrajectoryRecord {
    pub fn mode_mass(&self, k: usize) -> f64 {
        self.samples[k].z.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn max_mass_drift(&self) -> f64 {
        let m0 = self.samples[0].mass;
        self.samples.iter().map(|s| (s.mass - m0).abs()).fold(0.0, f64::max) / m0.max(f64::MIN_POSITIVE)
    }

    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.samples[0].energy;
        self.samples.iter().map(|s| (s.energy - e0).abs()).fold(0.0, f64::max) / e0.abs().max(f64::MIN_POSITIVE)
    }

    /// `||profile(t_2) - profile(t_1)||` along consecutive snapshots.
    pub fn profile_increments(&self, h: f64) -> Vec<(f64, f64, f64)> {
        self.profiles
            .windows(2)
            .map(|w| {
                let d: Vec<C64> = w[1].1.iter().zip(&w[0].1).map(|(a, b)| a - b).collect();
                (w[0].0, w[1].0, norm2(h, &d))
            })
            .collect()
    }
}

/// `L / (2 v_max)` with `v_max = 2 sqrt(w_max - c)`.
pub fn wrap_time(model: &OperatorModel, w_max: f64) -> Option<f64> {
    let k = (w_max - model.c()).max(0.0).sqrt();
    (k > 0.0).then(|| 2.0 * model.grid().half_length / (2.0 * 2.0 * k))
}

/// Integrates from `t = 0` to `t_end`, sampling every `stride` steps.
pub fn simulate(model: &OperatorModel, cfg: &SimConfig, frame: Option<&FgrFrame>) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let u0 = cfg.initial.build(model)?;
    simulate_from(model, cfg, frame, u0)
}

pub fn simulate_from(model: &OperatorModel, cfg: &SimConfig, frame: Option<&FgrFrame>, mut u: Vec<C64>) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    model.check_grid(&u)?;
    let h = model.h();
    let stepper = Stepper::new(model, cfg, cfg.dt);
    let n_steps = (cfg.t_end / cfg.dt).round() as usize;
    let epsilon = h1_norm(model, &u);
    let t_wrap = cfg.max_frequency.and_then(|w| wrap_time(model, w));
    let beyond_wrap = cfg.sponge.is_none() && t_wrap.is_some_and(|tw| cfg.t_end > tw);

    let mut snap_times: Vec<usize> = (0..cfg.snapshots)
        .map(|k| (n_steps as f64 / 2f64.powi(k as i32)).round() as usize)
        .filter(|&s| s > 0)
        .collect();
    snap_times.sort_unstable();
    snap_times.dedup();

    let mut strich: Vec<f64> = vec![0.0; cfg.strichartz.len()];
    let mut resonant: Vec<f64> = frame.map(|f| vec![0.0; f.minimal.len()]).unwrap_or_default();
    let mut g_acc = frame.map(|_| 0.0);
    let mut f_acc = 0.0;
    let mut samples = Vec::with_capacity(n_steps / cfg.stride + 1);
    let mut profiles = Vec::new();

    let sample = |u: &[C64], t: f64| -> Result<(Sample, Vec<C64>)> {
        let st = model.project_modes(u, t)?;
        let (z_normal, zeta, g_weighted, fgr_source) = match frame {
            None => (None, None, None, None),
            Some(fr) => {
                let (zn, fnf) = fr.normal_coordinates(&st.z, &st.f, t, model);
                let zeta = fr.zeta.apply(&zn, t)?;
                let g = fr.g.apply(&zn, &fnf, t);
                let src = std::f64::consts::PI * fr.packets.iter().map(|p| p.delta_form(&zeta)).sum::<f64>();
                (Some(zn), Some(zeta), Some(weighted_norm(model, &g, cfg.weight)), Some(src))
            }
        };
        let s = Sample {
            t,
            mass: norm2(h, u),
            energy: energy(model, u, cfg.gamma(t), cfg.power),
            f_l2: norm2(h, &st.f),
            f_h1: h1_norm(model, &st.f),
            f_weighted: weighted_norm(model, &st.f, cfg.weight),
            z: st.z,
            z_normal,
            zeta,
            g_weighted,
            fgr_source,
        };
        Ok((s, st.f))
    };

    let dt_s = cfg.dt * cfg.stride as f64;
    let (s0, f0) = sample(&u, 0.0)?;
    let accumulate = |s: &Sample, f: &[C64], w: f64, strich: &mut [f64], resonant: &mut [f64], g_acc: &mut Option<f64>, f_acc: &mut f64| {
        for (acc, &(r, p)) in strich.iter_mut().zip(&cfg.strichartz) {
            let v = lp_norm(h, f, p);
            if r.is_infinite() {
                *acc = acc.max(v);
            } else {
                *acc += w * v.powf(r);
            }
        }
        if let Some(fr) = frame {
            let z = s.z_normal.as_deref().unwrap_or(&s.z);
            for (acc, tr) in resonant.iter_mut().zip(&fr.minimal) {
                *acc += w * tr.mu.add(&tr.nu).monomial(z).norm_sqr();
            }
        }
        if let (Some(a), Some(gw)) = (g_acc.as_mut(), s.g_weighted) {
            *a += w * gw * gw;
        }
        *f_acc += w * s.f_weighted * s.f_weighted;
    };
    accumulate(&s0, &f0, 0.5 * dt_s, &mut strich, &mut resonant, &mut g_acc, &mut f_acc);
    samples.push(s0);

    let mut next_snap = 0;
    for k in 0..n_steps {
        let t = k as f64 * cfg.dt;
        stepper.step(&mut u, t)?;
        let step = k + 1;
        let t1 = step as f64 * cfg.dt;
        if next_snap < snap_times.len() && snap_times[next_snap] == step {
            profiles.push((t1, free_flow(model, -t1, &u)));
            next_snap += 1;
        }
        if step % cfg.stride == 0 {
            let (s, f) = sample(&u, t1)?;
            let w = if step + cfg.stride > n_steps { 0.5 * dt_s } else { dt_s };
            accumulate(&s, &f, w, &mut strich, &mut resonant, &mut g_acc, &mut f_acc);
            samples.push(s);
        }
    }

    let strichartz = cfg
        .strichartz
        .iter()
        .zip(&strich)
        .map(|(&(r, p), &a)| (r, p, if r.is_infinite() { a } else { a.powf(1.0 / r) }))
        .collect();
    let resonant_l2 = frame
        .map(|fr| fr.minimal.iter().zip(&resonant).map(|(t, &v)| (format!("m={} mu={:?} nu={:?}", t.m, t.mu, t.nu), v)).collect())
        .unwrap_or_default();
    Ok(TrajectoryRecord {
        samples,
        epsilon,
        stiffness: stepper.stiffness,
        t_wrap,
        beyond_wrap,
        strichartz,
        resonant_l2,
        g_l2: g_acc,
        f_l2_weighted: f_acc,
        profiles,
        final_state: u,
    })
}
