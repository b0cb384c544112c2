//! Browser bindings. Frequencies are in MHz (cycles/us) and times in us;
//! every function has a plain Rust form for native use and a `js_` export.

use nvdress::ensemble::EnsembleConfig;
use nvdress::experiments::{coherence_vs_time, Setup};
use nvdress::filter::{filter, second_order_l, FilterParams};
use nvdress::model::{build_lambda_hamiltonian, matched_drive, restricted_spectrum, FieldPreset, FrequencyConvention};
use nvdress::noise::calibrate_dephasing;
use nvdress::quantum::Level;
use wasm_bindgen::prelude::*;

const CONV: FrequencyConvention = FrequencyConvention::Ordinary;
const T2_STAR: f64 = 3.0;
const TAU_BETA: f64 = 25.0;
/// Keeps a click from freezing the page.
pub const MAX_RUNS: usize = 400;

fn preset(name: &str) -> Result<FieldPreset, String> {
    FieldPreset::by_name(name).ok_or_else(|| format!("unknown preset `{name}`"))
}

/// Filter function on `n` points over `[-w_max, w_max]`, normalized by `t^2`.
pub fn filter_curve(omega: f64, t: f64, w_max: f64, n: usize) -> Result<Vec<f64>, String> {
    let p = FilterParams::new(CONV.to_internal(omega), t).map_err(|e| e.to_string())?;
    if !w_max.is_finite() || w_max <= 0.0 || n < 2 {
        return Err("need w_max > 0 and at least two points".into());
    }
    Ok((0..n)
        .map(|i| {
            let w = -w_max + 2.0 * w_max * i as f64 / (n - 1) as f64;
            filter(CONV.to_internal(w), &p) / (t * t)
        })
        .collect())
}

/// Second-order `L(t)` under the calibrated dephasing spectrum.
pub fn second_order_coherence(omega: f64, t: f64) -> Result<f64, String> {
    let ou = calibrate_dephasing(T2_STAR, TAU_BETA).map_err(|e| e.to_string())?;
    let p = FilterParams::new(CONV.to_internal(omega), t).map_err(|e| e.to_string())?;
    second_order_l(&ou, &p).map_err(|e| e.to_string())
}

/// `[E_-, E_0, E_+, resonance]` in MHz: the dressed ground/A2 levels of a
/// matched drive and the signal frequency resonant with the dark state.
pub fn dressed_summary(preset_name: &str, omega: f64) -> Result<Vec<f64>, String> {
    let p = preset(preset_name)?;
    let setup = Setup::new(&p, CONV, EnsembleConfig::new(1, 0)).map_err(|e| e.to_string())?;
    let w = CONV.to_internal(omega);
    let drive = matched_drive(&setup.nv, w, setup.phi_l).map_err(|e| e.to_string())?;
    let h = build_lambda_hamiltonian(&setup.nv, &drive);
    let mut out: Vec<f64> = restricted_spectrum(&h, &[Level::Minus, Level::Plus, Level::A2])
        .into_iter()
        .map(|e| CONV.from_internal(e))
        .collect();
    out.push(CONV.from_internal(setup.resonance(w).map_err(|e| e.to_string())?));
    Ok(out)
}

/// Ensemble `|L(t)|` on `0, interval, .., t_end`.
pub fn coherence_curve(
    preset_name: &str,
    omega: f64,
    runs: usize,
    seed: u64,
    t_end: f64,
    interval: f64,
) -> Result<Vec<f64>, String> {
    if runs == 0 || runs > MAX_RUNS {
        return Err(format!("runs must be in 1..={MAX_RUNS}"));
    }
    let p = preset(preset_name)?;
    let setup = Setup::new(&p, CONV, EnsembleConfig::new(runs, seed)).map_err(|e| e.to_string())?;
    let series = coherence_vs_time(&setup, CONV.to_internal(omega), t_end, interval).map_err(|e| e.to_string())?;
    Ok(series.y)
}

#[wasm_bindgen(js_name = filterCurve)]
pub fn js_filter_curve(omega: f64, t: f64, w_max: f64, n: usize) -> Result<Vec<f64>, JsError> {
    filter_curve(omega, t, w_max, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = secondOrderCoherence)]
pub fn js_second_order_coherence(omega: f64, t: f64) -> Result<f64, JsError> {
    second_order_coherence(omega, t).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = dressedSummary)]
pub fn js_dressed_summary(preset_name: &str, omega: f64) -> Result<Vec<f64>, JsError> {
    dressed_summary(preset_name, omega).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = coherenceCurve)]
pub fn js_coherence_curve(
    preset_name: &str,
    omega: f64,
    runs: usize,
    seed: u64,
    t_end: f64,
    interval: f64,
) -> Result<Vec<f64>, JsError> {
    coherence_curve(preset_name, omega, runs, seed, t_end, interval).map_err(|e| JsError::new(&e))
}
