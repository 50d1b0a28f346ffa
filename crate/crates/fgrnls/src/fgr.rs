//! Fermi golden rule: shell vectors, the delta-form, its cancellations and the Lyapunov balance.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::algebra::{gradient_zbar, Coupling, HamExpansion, PointBuf};
use crate::birkhoff::ReducedForm;
use crate::error::{Error, Result};
use crate::resonance::{IndexTriple, ResonanceCatalog};
use crate::spectral::{pair, plemelj_parts, OperatorModel};

/// Positivity alarm for the delta-form.
pub const POSITIVITY_ALARM: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct FgrMember {
    pub triple: IndexTriple,
    pub phi: Coupling,
}

impl FgrMember {
    /// `zeta^mu zetabar^nu`.
    pub fn monomial(&self, zeta: &[C64]) -> C64 {
        let zb: Vec<C64> = zeta.iter().map(|v| v.conj()).collect();
        self.triple.mu.monomial(zeta) * self.triple.nu.monomial(&zb)
    }
}

/// The members of one shell `M_w` with their delta and principal-value Gram matrices.
#[derive(Clone, Debug)]
pub struct FgrPacket {
    pub w: f64,
    pub members: Vec<FgrMember>,
    /// `<delta(H - w) conj Phi_i, Phi_k>`.
    pub gram_delta: Vec<Vec<C64>>,
    /// `<P.V. (H - w)^{-1} conj Phi_i, Phi_k>`.
    pub gram_pv: Vec<Vec<C64>>,
}

impl FgrPacket {
    pub fn new(model: &OperatorModel, w: f64, members: Vec<FgrMember>) -> Result<FgrPacket> {
        if w <= model.c() {
            return Err(Error::Input(format!("packet frequency {w} is not above the threshold {}", model.c())));
        }
        if let Some(first) = members.first() {
            let m = first.triple.m;
            if members.iter().any(|x| x.triple.m != m) {
                return Err(Error::Input(format!("packet at w = {w} mixes harmonics")));
            }
        }
        let h = model.h();
        let mut parts = Vec::with_capacity(members.len());
        for mem in &members {
            parts.push(plemelj_parts(model, w, mem.phi.data())?);
        }
        let n = members.len();
        let mut gram_delta = vec![vec![C64::new(0.0, 0.0); n]; n];
        let mut gram_pv = vec![vec![C64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            // delta and P.V. are real operators: D conj(v) = conj(D v)
            let di: Vec<C64> = parts[i].0.iter().map(|v| v.conj()).collect();
            let pi: Vec<C64> = parts[i].1.iter().map(|v| v.conj()).collect();
            for k in 0..n {
                gram_delta[i][k] = pair(h, &di, members[k].phi.data());
                gram_pv[i][k] = pair(h, &pi, members[k].phi.data());
            }
        }
        Ok(FgrPacket { w, members, gram_delta, gram_pv })
    }

    fn coefficients(&self, zeta: &[C64]) -> Vec<C64> {
        self.members.iter().map(|m| m.monomial(zeta)).collect()
    }

    /// `<delta(H - w) conj Phi_w, Phi_w>` from the cached Gram matrix.
    pub fn delta_form(&self, zeta: &[C64]) -> f64 {
        let c = self.coefficients(zeta);
        quad(&self.gram_delta, &c).re
    }
}

fn quad(g: &[Vec<C64>], c: &[C64]) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for i in 0..c.len() {
        for k in 0..c.len() {
            s += c[i].conj() * c[k] * g[i][k];
        }
    }
    s
}

/// `Phi_w(zeta) = sum_{M_w} zeta^mu zetabar^nu Phi_{m mu nu}`.
pub fn assemble_phi_w(packet: &FgrPacket, zeta: &[C64]) -> Vec<C64> {
    let n = packet.members.first().map(|m| m.phi.len()).unwrap_or(0);
    let mut out = vec![C64::new(0.0, 0.0); n];
    for m in &packet.members {
        let c = m.monomial(zeta);
        for (o, v) in out.iter_mut().zip(m.phi.data()) {
            *o += c * v;
        }
    }
    out
}

/// Packets for every shell of the catalog, with couplings from the reduced normal form.
pub fn build_packets(catalog: &ResonanceCatalog, reduced: &ReducedForm, model: &OperatorModel) -> Result<Vec<FgrPacket>> {
    let mut out = Vec::with_capacity(catalog.shells.len());
    for s in &catalog.shells {
        let members: Vec<FgrMember> = s
            .members
            .iter()
            .filter_map(|t| reduced.phi.get(t).map(|phi| FgrMember { triple: t.clone(), phi: phi.clone() }))
            .collect();
        if !members.is_empty() {
            out.push(FgrPacket::new(model, s.w, members)?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct FgrValue {
    pub value: f64,
    pub per_shell: Vec<(f64, f64)>,
    /// `sum_{M} |zeta^{mu + nu}|^2`.
    pub reference: f64,
}

/// `sum_w <delta(H - w) conj Phi_w, Phi_w>`; errors on a negative value beyond the alarm.
pub fn fgr_form(packets: &[FgrPacket], zeta: &[C64]) -> Result<FgrValue> {
    let per_shell: Vec<(f64, f64)> = packets.iter().map(|p| (p.w, p.delta_form(zeta))).collect();
    let value: f64 = per_shell.iter().map(|x| x.1).sum();
    let reference = reference_weight(packets, zeta);
    let scale: f64 = packets
        .iter()
        .map(|p| {
            let c = p.coefficients(zeta);
            (0..c.len()).map(|i| c[i].norm_sqr() * p.gram_delta[i][i].norm()).sum::<f64>()
        })
        .sum();
    if value < -POSITIVITY_ALARM * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!("delta-form is negative: {value:.3e}")));
    }
    Ok(FgrValue { value, per_shell, reference })
}

fn reference_weight(packets: &[FgrPacket], zeta: &[C64]) -> f64 {
    packets
        .iter()
        .flat_map(|p| p.members.iter())
        .map(|m| {
            let e = m.triple.mu.add(&m.triple.nu);
            e.monomial(zeta).norm_sqr()
        })
        .sum()
}

/// Min and max of `fgr_form / sum |zeta^{mu+nu}|^2` over Haar-random points on spheres.
#[derive(Clone, Debug, Serialize)]
pub struct RayleighReport {
    pub radii: Vec<f64>,
    pub samples_per_radius: usize,
    pub min_quotient: f64,
    pub max_quotient: f64,
    /// `(radius, quotient)` for every sample.
    pub quotients: Vec<(f64, f64)>,
    pub holds: bool,
}

pub fn rayleigh_quotients(packets: &[FgrPacket], n_modes: usize, radii: &[f64], samples: usize, seed: u64) -> Result<RayleighReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quotients = Vec::with_capacity(radii.len() * samples);
    for &r in radii {
        for _ in 0..samples {
            let g: Vec<C64> = (0..n_modes)
                .map(|_| C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
                .collect();
            let norm = g.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let zeta: Vec<C64> = g.iter().map(|v| v * (r / norm)).collect();
            let v = fgr_form(packets, &zeta)?;
            if v.reference > 0.0 {
                quotients.push((r, v.value / v.reference));
            }
        }
    }
    let min_quotient = quotients.iter().map(|q| q.1).fold(f64::INFINITY, f64::min);
    let max_quotient = quotients.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max);
    let holds = !quotients.is_empty() && min_quotient > 10.0 * POSITIVITY_ALARM;
    Ok(RayleighReport { radii: radii.to_vec(), samples_per_radius: samples, min_quotient, max_quotient, quotients, holds })
}

/// Residuals of the three exact identities behind the Lyapunov balance.
#[derive(Clone, Debug, Default, Serialize)]
pub struct CancellationReport {
    /// `|Im sum_j zetabar_j d_{zetabar_j} Z_0|`, relative.
    pub z0: f64,
    /// Imaginary part of the weighted principal-value double sum, relative.
    pub principal_value: f64,
    /// Weighted delta double sum plus `sum_w` delta-form, relative.
    pub delta: f64,
}

impl CancellationReport {
    fn merge(&mut self, o: &CancellationReport) {
        self.z0 = self.z0.max(o.z0);
        self.principal_value = self.principal_value.max(o.principal_value);
        self.delta = self.delta.max(o.delta);
    }
}

/// Evaluates the cancellations at one point.
pub fn cancellation_at(z0: &HamExpansion, packets: &[FgrPacket], zeta: &[C64], model: &OperatorModel) -> CancellationReport {
    let h = model.h();
    let n = zeta.len();
    let p = PointBuf::physical(0.0, zeta, &vec![C64::new(0.0, 0.0); model.grid().points]);
    let v = p.view();
    let mut sum = C64::new(0.0, 0.0);
    let mut scale = 0.0;
    for j in 0..n {
        let g = gradient_zbar(z0, j, h);
        for t in g.terms() {
            let x = zeta[j].conj() * t.evaluate(&v, model);
            sum += x;
            scale += x.norm();
        }
    }
    let res_z0 = if scale > 0.0 { sum.im.abs() / scale } else { sum.im.abs() };

    let (mut pv, mut pv_scale) = (C64::new(0.0, 0.0), 0.0);
    let (mut dl, mut dl_scale, mut forms) = (0.0, 0.0, 0.0);
    for pk in packets {
        let c = pk.coefficients(zeta);
        for (i, a) in pk.members.iter().enumerate() {
            for (k, b) in pk.members.iter().enumerate() {
                // (alpha, beta) = member i, (mu, nu) = member k
                let x = c[i].conj() * c[k];
                let wp = (b.triple.nu.order() + a.triple.mu.order()) as f64;
                let tp = x * pk.gram_pv[i][k] * wp;
                pv += tp;
                pv_scale += tp.norm();
                let wd = a.triple.mu.order() as f64 - b.triple.nu.order() as f64;
                let td = (x * pk.gram_delta[i][k]).re * wd;
                dl += td;
                dl_scale += td.abs();
            }
        }
        forms += pk.delta_form(zeta);
    }
    let rel = |r: f64, s: f64| if s > 0.0 { r / s } else { r };
    CancellationReport { z0: res_z0, principal_value: rel(pv.im.abs(), pv_scale), delta: rel((dl + forms).abs(), dl_scale) }
}

/// Worst residuals over a list of points.
pub fn cancellation_checks(z0: &HamExpansion, packets: &[FgrPacket], zetas: &[Vec<C64>], model: &OperatorModel) -> CancellationReport {
    let mut out = CancellationReport::default();
    for z in zetas {
        out.merge(&cancellation_at(z0, packets, z, model));
    }
    out
}

/// Time series of the Lyapunov balance residual.
#[derive(Clone, Debug, Serialize)]
pub struct BalanceReport {
    pub times: Vec<f64>,
    /// `d/dt sum |zeta_j|^2 / 2 + pi sum_w` delta-form, at interior samples.
    pub residual: Vec<f64>,
    /// `pi sum_w` delta-form at every sample.
    pub source: Vec<f64>,
    /// `int |residual| dt`.
    pub residual_integral: f64,
    /// `sum |zeta(t)|^2 / 2 + pi int_0^t delta-form - sum |zeta(0)|^2 / 2`.
    pub drift: Vec<f64>,
    pub max_drift: f64,
}

pub fn lyapunov_balance(times: &[f64], zeta: &[Vec<C64>], packets: &[FgrPacket]) -> Result<BalanceReport> {
    let n = times.len();
    if zeta.len() != n {
        return Err(Error::Input("time and zeta series differ in length".into()));
    }
    if n < 3 {
        return Err(Error::Input("balance needs at least three samples".into()));
    }
    let dt = times[1] - times[0];
    for k in 1..n {
        if ((times[k] - times[k - 1]) - dt).abs() > 1e-9 * dt.abs().max(1.0) {
            return Err(Error::Input("balance requires uniform sampling".into()));
        }
    }
    let mass: Vec<f64> = zeta.iter().map(|z| z.iter().map(|v| v.norm_sqr()).sum::<f64>() / 2.0).collect();
    let source: Vec<f64> = zeta.iter().map(|z| PI * packets.iter().map(|p| p.delta_form(z)).sum::<f64>()).collect();
    let mut residual = Vec::with_capacity(n - 2);
    let mut residual_integral = 0.0;
    for k in 1..n - 1 {
        let r = (mass[k + 1] - mass[k - 1]) / (2.0 * dt) + source[k];
        residual.push(r);
        residual_integral += r.abs() * dt;
    }
    let mut drift = Vec::with_capacity(n);
    let mut acc = 0.0;
    drift.push(0.0);
    for k in 1..n {
        acc += 0.5 * (source[k] + source[k - 1]) * dt;
        drift.push(mass[k] + acc - mass[0]);
    }
    let max_drift = drift.iter().map(|d| d.abs()).fold(0.0, f64::max);
    Ok(BalanceReport { times: times[1..n - 1].to_vec(), residual, source, residual_integral, drift, max_drift })
}
