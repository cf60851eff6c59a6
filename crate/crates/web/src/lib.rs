//! Browser bindings. Every entry point returns a JSON string; the page in
//! `www/` parses it and draws on a canvas.

use purcell_core::fockspace::{Storage, TruncatedSpace};
use purcell_core::liouvillian::{build_blackbox, build_displaced, TermToggles};
use purcell_core::model::{displaced_frame, drive_for_photons, polariton_frame, SystemParams};
use purcell_core::perturbation::{gamma_coherent_analytic, gamma_thermal_analytic};
use purcell_core::spectral::{block_labels, t1_rate_diag};
use serde::Serialize;
use wasm_bindgen::prelude::*;

// kept small: the browser runs single-threaded
const MAX_DIM: usize = 12;
const MAX_POINTS: usize = 25;

#[derive(Serialize)]
pub struct Curve {
    pub x: Vec<f64>,
    pub numeric: Vec<f64>,
    pub analytic: Vec<f64>,
}

#[derive(Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
    pub label: Option<String>,
}

fn space(nc: usize, nq: usize) -> Result<TruncatedSpace, String> {
    if nc.max(nq) > MAX_DIM || nc * nq > 64 {
        return Err(format!("cutoffs ({nc}, {nq}) too large for the browser"));
    }
    TruncatedSpace::new(&[nc, nq]).map_err(|e| e.to_string())
}

fn grid(max: f64, points: usize) -> Result<Vec<f64>, String> {
    if !(2..=MAX_POINTS).contains(&points) || !(max > 0.0) {
        return Err(format!("need 2..={MAX_POINTS} points and a positive range"));
    }
    Ok((0..points).map(|i| max * i as f64 / (points - 1) as f64).collect())
}

/// Γ against cavity thermal occupation, with the closed form alongside.
#[allow(clippy::too_many_arguments)]
pub fn thermal_curve(
    delta: f64, g: f64, u: f64, kappa_a: f64, kappa_c: f64, nbar_max: f64, points: usize, nc: usize, nq: usize,
) -> Result<Curve, String> {
    let s = space(nc, nq)?;
    let x = grid(nbar_max, points)?;
    let mut c = Curve { x: x.clone(), numeric: vec![], analytic: vec![] };
    for n in x {
        let p = SystemParams::from_detuning(delta, g, u, kappa_a, kappa_c).with_thermal(0.0, n);
        p.validate().map_err(|e| e.to_string())?;
        let f = polariton_frame(&p).map_err(|e| e.to_string())?;
        let b = build_blackbox(&f, &s, TermToggles::default(), Storage::Sparse).map_err(|e| e.to_string())?;
        c.numeric.push(t1_rate_diag(&b).map_err(|e| e.to_string())?.gamma);
        c.analytic.push(gamma_thermal_analytic(&f).map_err(|e| e.to_string())?.total);
    }
    Ok(c)
}

/// Γ against mean cavity photon number under a coherent drive.
#[allow(clippy::too_many_arguments)]
pub fn drive_curve(
    delta: f64, g: f64, u: f64, kappa_c: f64, omega_d: f64, photons_max: f64, points: usize, nc: usize, nq: usize,
) -> Result<Curve, String> {
    let s = space(nc, nq)?;
    let x = grid(photons_max, points)?;
    let p = SystemParams::from_detuning(delta, g, u, 0.0, kappa_c);
    p.validate().map_err(|e| e.to_string())?;
    let frame = polariton_frame(&p).map_err(|e| e.to_string())?;
    let mut c = Curve { x: x.clone(), numeric: vec![], analytic: vec![] };
    for n in x {
        let d = drive_for_photons(&p, omega_d, n).and_then(|dr| displaced_frame(&p, &dr)).map_err(|e| e.to_string())?;
        let b = build_displaced(&d, &s, TermToggles::default(), Storage::Sparse).map_err(|e| e.to_string())?;
        c.numeric.push(t1_rate_diag(&b).map_err(|e| e.to_string())?.gamma);
        c.analytic.push(gamma_coherent_analytic(&d, &frame, None).map_err(|e| e.to_string())?.total);
    }
    Ok(c)
}

/// The `count` slowest eigenvalues of the thermal generator, labelled.
#[allow(clippy::too_many_arguments)]
pub fn thermal_spectrum(
    delta: f64, g: f64, u: f64, kappa_a: f64, kappa_c: f64, nbar: f64, nc: usize, nq: usize, count: usize,
) -> Result<Vec<Eigenvalue>, String> {
    let s = space(nc, nq)?;
    let p = SystemParams::from_detuning(delta, g, u, kappa_a, kappa_c).with_thermal(0.0, nbar);
    p.validate().map_err(|e| e.to_string())?;
    let f = polariton_frame(&p).map_err(|e| e.to_string())?;
    let b = build_blackbox(&f, &s, TermToggles::default(), Storage::Sparse).map_err(|e| e.to_string())?;
    Ok(block_labels(&b, count)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|(v, l)| Eigenvalue { re: v.re, im: v.im, label: l.map(|l| format!("({},{},{})", l.m_c, l.m_a, l.k)) })
        .collect())
}

fn json<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = thermalCurve)]
#[allow(clippy::too_many_arguments)]
pub fn thermal_curve_js(
    delta: f64, g: f64, u: f64, kappa_a: f64, kappa_c: f64, nbar_max: f64, points: usize, nc: usize, nq: usize,
) -> Result<String, JsValue> {
    json(thermal_curve(delta, g, u, kappa_a, kappa_c, nbar_max, points, nc, nq))
}

#[wasm_bindgen(js_name = driveCurve)]
#[allow(clippy::too_many_arguments)]
pub fn drive_curve_js(
    delta: f64, g: f64, u: f64, kappa_c: f64, omega_d: f64, photons_max: f64, points: usize, nc: usize, nq: usize,
) -> Result<String, JsValue> {
    json(drive_curve(delta, g, u, kappa_c, omega_d, photons_max, points, nc, nq))
}

#[wasm_bindgen(js_name = thermalSpectrum)]
#[allow(clippy::too_many_arguments)]
pub fn thermal_spectrum_js(
    delta: f64, g: f64, u: f64, kappa_a: f64, kappa_c: f64, nbar: f64, nc: usize, nq: usize, count: usize,
) -> Result<String, JsValue> {
    json(thermal_spectrum(delta, g, u, kappa_a, kappa_c, nbar, nc, nq, count))
}
