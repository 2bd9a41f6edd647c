//! Browser bindings: Poincare sections, recurrence-time curves, lattice bands.
//!
//! Every export returns plain numbers or a JSON string so the page needs no
//! glue beyond the generated wasm-bindgen shim.

use driven_lattice::classical::{self, ClassicalParams};
use driven_lattice::mathieu;
use driven_lattice::recipes::{self, TimesRegime, TimesRow};
use driven_lattice::units::ScaledParams;
use driven_lattice::Result;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_SEEDS: usize = 400;
const MAX_PERIODS: usize = 2000;

fn js(e: driven_lattice::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Flat `[z0, p0, z1, p1, ...]` stroboscopic points, seeds spread along
/// p = 0 between the well centre and its edge.
pub fn section(kappa: f64, lambda: f64, seeds: usize, periods: usize) -> Result<Vec<f64>> {
    let params = ClassicalParams::new(kappa, lambda).with_steps_per_period(recipes::fig1_steps(kappa));
    let seeds = classical::seed_line(seeds.clamp(1, MAX_SEEDS));
    let s = classical::poincare(&seeds, &params, periods.clamp(1, MAX_PERIODS))?;
    Ok(s.samples.iter().flat_map(|p| [p.z, p.p]).collect())
}

fn rows_json(rows: &[TimesRow]) -> Value {
    let col = |f: fn(&driven_lattice::resonance::TimeScales) -> f64| -> Vec<Option<f64>> {
        rows.iter().map(|r| r.times.as_ref().ok().map(f)).collect()
    };
    json!({
        "lambda": rows.iter().map(|r| r.lambda).collect::<Vec<_>>(),
        "q": rows.iter().map(|r| r.q).collect::<Vec<_>>(),
        "t_cl": col(|t| t.t_classical),
        "t_rev": col(|t| t.t_revival),
        "t_spr": col(|t| t.t_super_revival),
    })
}

/// Delicate (q ≤ 1) and robust (q ≥ 5) time-scale curves in drive phase.
pub fn curves(kbar: f64, vprime: f64, nbar: u32, points: usize) -> Result<Value> {
    let p = ScaledParams::new(kbar, vprime, 0.0, 0.0)?;
    let spec = recipes::resonance_spec(&p, nbar)?;
    let (weak, strong) = recipes::trend_grids(&p, spec, points.clamp(2, 2000))?;
    let delicate = recipes::times_table(&p, spec, TimesRegime::Delicate, &weak)?;
    let robust = recipes::times_table(&p, spec, TimesRegime::Robust, &strong)?;
    Ok(json!({"l": spec.l, "q0": p.q0, "delicate": rows_json(&delicate), "robust": rows_json(&robust)}))
}

/// Band energies E_n(κ) in recoil units for depth V′.
pub fn bands(vprime: f64, bands: usize, points: usize) -> Result<Value> {
    let pts = mathieu::band_structure(vprime / 4.0, bands.clamp(1, 12), points.clamp(2, 1000))?;
    let mut out = vec![Vec::new(); bands.clamp(1, 12)];
    for b in &pts {
        out[b.band_index].push([b.quasimomentum, b.energy]);
    }
    Ok(json!({"bands": out}))
}

#[wasm_bindgen]
pub fn poincare_section(
    kappa: f64,
    lambda: f64,
    seeds: usize,
    periods: usize,
) -> std::result::Result<Vec<f64>, JsError> {
    section(kappa, lambda, seeds, periods).map_err(js)
}

#[wasm_bindgen]
pub fn time_scale_curves(kbar: f64, vprime: f64, nbar: u32, points: usize) -> std::result::Result<String, JsError> {
    curves(kbar, vprime, nbar, points).map(|v| v.to_string()).map_err(js)
}

#[wasm_bindgen]
pub fn band_structure(vprime: f64, count: usize, points: usize) -> std::result::Result<String, JsError> {
    bands(vprime, count, points).map(|v| v.to_string()).map_err(js)
}
