//! Browser bindings: the Friedrichs scaling study, the bath autocorrelation and the secular
//! curve, each returning a JSON string for the page in `www/`.

use serde_json::json;
use vanhove_core::experiments::{scaling_study, secular_demo, ModelConfig, RecipeConfig, StudyConfig};
use vanhove_core::mixing::{autocorrelation_report, bath_autocorrelation};
use vanhove_core::model::{
    build_friedrichs, build_spin_bath, friedrichs_quadrature, thermal_state, CouplingProfile,
    FriedrichsParams, SpinBathParams,
};
use vanhove_core::{Error, Result};
use wasm_bindgen::prelude::*;

const BAND: [f64; 2] = [0.75, 1.25];
const TAU_STEPS: usize = 40;

fn friedrichs_params(n_modes: usize) -> Result<FriedrichsParams> {
    if n_modes < 2 {
        return Err(Error::Config("need at least two bath modes".into()));
    }
    let spacing = (BAND[1] - BAND[0]) / (n_modes - 1) as f64;
    Ok(FriedrichsParams {
        n_modes,
        band: BAND,
        profile: CouplingProfile::Flat { g: (spacing / std::f64::consts::TAU).sqrt() },
        ..FriedrichsParams::default_demo()
    })
}

/// Scaling study on the Friedrichs model with flat coupling tuned to unit golden-rule rate.
pub fn decay_json(lambdas: &[f64], n_modes: usize, theta: f64, tau_max: f64) -> Result<String> {
    let params = friedrichs_params(n_modes)?;
    let spacing = (BAND[1] - BAND[0]) / (n_modes - 1) as f64;
    let cfg = StudyConfig {
        model: ModelConfig::Friedrichs(params),
        recipe: RecipeConfig::FriedrichsEntangled { theta },
        lambdas: lambdas.to_vec(),
        tau_grid: (0..=TAU_STEPS).map(|k| tau_max * k as f64 / TAU_STEPS as f64).collect(),
        eta: spacing,
        dt: 0.05,
        ..StudyConfig::friedrichs_demo()
    };
    cfg.validate()?;
    Ok(serde_json::to_string(&scaling_study(&cfg)?)?)
}

/// `|<X(t) X>|` for the bath quadrature coupled to the system, with the recurrence time.
pub fn correlation_json(n_modes: usize, t_max: f64, points: usize) -> Result<String> {
    let model = build_friedrichs(&friedrichs_params(n_modes)?)?;
    let x = friedrichs_quadrature(n_modes, &model.couplings);
    let points = points.max(2);
    let times: Vec<f64> = (0..points).map(|k| t_max * k as f64 / (points - 1) as f64).collect();
    let report = autocorrelation_report(&times, &bath_autocorrelation(&model.spec, &x, &x, &times)?);
    Ok(serde_json::to_string(&json!({
        "report": report,
        "recurrence_time": model.spec.window.map(|w| w.t_rec),
        "usable_time": model.spec.window.map(|w| w.usable()),
    }))?)
}

/// Secular demonstration on the spin bath at `beta`, with a wrong thermal reference at
/// `beta_wrong`; equal temperatures give a flat curve.
pub fn secular_json(beta: f64, beta_wrong: f64, lambda: f64) -> Result<String> {
    let params = SpinBathParams { beta, ..SpinBathParams::default_demo() };
    let spec = build_spin_bath(&params)?;
    let cfg = StudyConfig {
        model: ModelConfig::SpinBath(params),
        lambdas: vec![lambda],
        wrong_reference: Some(thermal_state(&spec.h_b, beta_wrong)),
        ..StudyConfig::spin_bath_demo()
    };
    Ok(serde_json::to_string(&secular_demo(&cfg)?)?)
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn friedrichs_decay(
    lambdas: &[f64],
    n_modes: usize,
    theta: f64,
    tau_max: f64,
) -> std::result::Result<String, JsError> {
    js(decay_json(lambdas, n_modes, theta, tau_max))
}

#[wasm_bindgen]
pub fn bath_correlation(n_modes: usize, t_max: f64, points: usize) -> std::result::Result<String, JsError> {
    js(correlation_json(n_modes, t_max, points))
}

#[wasm_bindgen]
pub fn secular_curve(beta: f64, beta_wrong: f64, lambda: f64) -> std::result::Result<String, JsError> {
    js(secular_json(beta, beta_wrong, lambda))
}
