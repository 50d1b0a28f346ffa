//! Browser bindings: bound states of a well, the resonance catalog for a spectrum,
//! and the delta-form curve of a radiation profile.

use fgrnls::resonance::{build_index_sets, check_hypotheses, resonance_budget, TOL_RES};
use fgrnls::spectral::{build_operator, spectral_density_form, GridSpec, PotentialPreset, DEFAULT_EPS_SCHEDULE};
use fgrnls::C64;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

fn preset(a: f64, kappa2: f64) -> PotentialPreset {
    PotentialPreset::PoschlTeller { a, kappa2 }
}

/// Eigenvalues, threshold and mode profiles of the Poschl-Teller well as JSON.
pub fn spectrum_json(a: f64, kappa2: f64, half_length: f64, points: usize) -> Result<Value, fgrnls::Error> {
    let grid = GridSpec::new(half_length, points)?;
    let p = preset(a, kappa2);
    let model = build_operator(grid, &p, None)?;
    let x = grid.coords();
    let stride = (points / 256).max(1);
    let keep = |v: &[f64]| v.iter().step_by(stride).copied().collect::<Vec<f64>>();
    Ok(json!({
        "lambda": model.eigenvalues(),
        "c": model.c(),
        "exact": p.exact_levels(),
        "x": keep(&x),
        "potential": keep(&p.sample(&grid)),
        "modes": model.modes().iter().map(|m| keep(m)).collect::<Vec<_>>(),
    }))
}

/// Budget, hypothesis verdicts and the minimal resonant set for a shifted spectrum.
pub fn resonance_json(lambda: &[f64], c: f64) -> Result<Value, fgrnls::Error> {
    let budget = resonance_budget(lambda, c)?;
    let report = check_hypotheses(lambda, c, &budget, TOL_RES);
    let catalog = if report.clean() { Some(build_index_sets(lambda, c, &budget)?) } else { None };
    Ok(json!({
        "N": budget.n,
        "clean": report.clean(),
        "violations": report.violations,
        "big_m": catalog.as_ref().map(|c| c.big_m.len()),
        "minimal": catalog.as_ref().map(|c| &c.minimal),
        "shells": catalog.as_ref().map(|c| c.frequencies()),
    }))
}

/// `w -> <delta(H - w) conj Phi, Phi>` for a Gaussian profile projected off the bound states.
#[allow(clippy::too_many_arguments)]
pub fn density_json(a: f64, kappa2: f64, center: f64, width: f64, momentum: f64, w_max: f64, samples: usize, points: usize) -> Result<Value, fgrnls::Error> {
    let grid = GridSpec::new(40.0, points)?;
    let model = build_operator(grid, &preset(a, kappa2), None)?;
    let phi = model.project_continuous(&grid.sample_complex(|x| {
        let y = (x - center) / width;
        C64::from_polar((-0.5 * y * y).exp(), momentum * x)
    }));
    let c = model.c();
    let n = samples.max(2);
    let mut w = Vec::with_capacity(n);
    let mut value = Vec::with_capacity(n);
    for k in 0..n {
        let s = c + (w_max - c) * (k as f64 + 0.5) / n as f64;
        w.push(s);
        value.push(spectral_density_form(&model, s, &phi, &DEFAULT_EPS_SCHEDULE)?.value);
    }
    Ok(json!({ "c": c, "w": w, "value": value }))
}

#[wasm_bindgen]
pub fn spectrum(a: f64, kappa2: f64, half_length: f64, points: usize) -> Result<String, JsValue> {
    spectrum_json(a, kappa2, half_length, points).map(|v| v.to_string()).map_err(err)
}

#[wasm_bindgen]
pub fn resonance(lambda: Vec<f64>, c: f64) -> Result<String, JsValue> {
    resonance_json(&lambda, c).map(|v| v.to_string()).map_err(err)
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn density(a: f64, kappa2: f64, center: f64, width: f64, momentum: f64, w_max: f64, samples: usize, points: usize) -> Result<String, JsValue> {
    density_json(a, kappa2, center, width, momentum, w_max, samples, points).map(|v| v.to_string()).map_err(err)
}
