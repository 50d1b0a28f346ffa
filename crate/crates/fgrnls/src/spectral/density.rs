use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::Serialize;

use super::grid::inner;
use super::openline::outgoing_resolvent;
use super::operator::OperatorModel;
use crate::error::Result;

pub const DEFAULT_EPS_SCHEDULE: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

/// Limiting-absorption estimate of `(Phi, delta(H - w) Phi)`.
#[derive(Clone, Debug, Serialize)]
pub struct DensityEstimate {
    pub value: f64,
    /// `(1/pi) Im (Phi, R(w + i eps) Phi)` at each schedule entry.
    pub samples: Vec<(f64, f64)>,
    /// Successive extrapolants; the last one is `value`.
    pub extrapolants: Vec<f64>,
    /// The `eps = 0+` boundary value from the outgoing solve.
    pub boundary_value: f64,
    pub below_continuum: bool,
    pub reliable: bool,
}

impl DensityEstimate {
    fn zero() -> Self {
        Self {
            value: 0.0,
            samples: Vec::new(),
            extrapolants: Vec::new(),
            boundary_value: 0.0,
            below_continuum: true,
            reliable: true,
        }
    }
}

/// Polynomial extrapolation to `x = 0` through `(x_i, y_i)` (Neville).
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut p = ys.to_vec();
    let mut diag = vec![ys[0]];
    for k in 1..n {
        for i in 0..n - k {
            p[i] = (xs[i + k] * p[i] - xs[i] * p[i + 1]) / (xs[i + k] - xs[i]);
        }
        diag.push(p[0]);
    }
    diag
}

pub fn spectral_density_form(model: &OperatorModel, w: f64, phi: &[C64], eps_schedule: &[f64]) -> Result<DensityEstimate> {
    model.check_grid(phi)?;
    if w <= model.c() {
        return Ok(DensityEstimate::zero());
    }
    let h = model.h();
    let mut samples = Vec::with_capacity(eps_schedule.len());
    for &eps in eps_schedule {
        let x = outgoing_resolvent(model, C64::new(w, eps), phi)?;
        samples.push((eps, inner(h, phi, &x).im / PI));
    }
    let x0 = outgoing_resolvent(model, C64::new(w, 0.0), phi)?;
    let boundary_value = inner(h, phi, &x0).im / PI;
    let (value, extrapolants) = if samples.is_empty() {
        (boundary_value, Vec::new())
    } else {
        let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let ex = extrapolate_to_zero(&xs, &ys);
        (*ex.last().unwrap(), ex)
    };
    let scale = inner(h, phi, phi).re.max(f64::MIN_POSITIVE);
    let spread = if extrapolants.len() >= 2 {
        (extrapolants[extrapolants.len() - 1] - extrapolants[extrapolants.len() - 2]).abs()
    } else {
        0.0
    };
    let reliable = spread <= 0.05 * value.abs() + 1e-10 * scale;
    Ok(DensityEstimate { value, samples, extrapolants, boundary_value, below_continuum: false, reliable })
}

/// Gaussian-smoothed box histogram `sum_k |(e_k, Phi)|^2 g_sigma(E_k - w)`.
///
/// With `sigma = None` the width follows the local level spacing and a
/// two-width combination removes the leading `sigma^2` bias.
pub fn histogram_density(model: &OperatorModel, w: f64, phi: &[C64], sigma: Option<f64>) -> Result<f64> {
    model.check_grid(phi)?;
    if w <= model.c() {
        return Ok(0.0);
    }
    let (energies, weights) = model.continuum_weights(phi);
    let smooth = |s: f64| -> f64 {
        let norm = 1.0 / (s * (2.0 * PI).sqrt());
        energies
            .iter()
            .zip(&weights)
            .map(|(&e, &c)| c * norm * (-(e - w) * (e - w) / (2.0 * s * s)).exp())
            .sum()
    };
    Ok(match sigma {
        Some(s) => smooth(s),
        None => {
            let spacing = 2.0 * PI * (w - model.c()).sqrt() / model.grid().half_length;
            let s = 0.75 * spacing;
            2.0 * smooth(s) - smooth(s * 2f64.sqrt())
        }
    })
}

/// `delta(H - w) v` and `P.V.(H - w)^{-1} v` from the two boundary values.
pub fn plemelj_parts(model: &OperatorModel, w: f64, v: &[C64]) -> Result<(Vec<C64>, Vec<C64>)> {
    let plus = outgoing_resolvent(model, C64::new(w, 0.0), v)?;
    let conj_v: Vec<C64> = v.iter().map(|a| a.conj()).collect();
    let minus: Vec<C64> = outgoing_resolvent(model, C64::new(w, 0.0), &conj_v)?.into_iter().map(|a| a.conj()).collect();
    let two_pi_i = C64::new(0.0, 2.0 * PI);
    let delta = plus.iter().zip(&minus).map(|(p, m)| (p - m) / two_pi_i).collect();
    let pv = plus.iter().zip(&minus).map(|(p, m)| (p + m) * 0.5).collect();
    Ok((delta, pv))
}
