//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every exported function samples on the uniform grid `0, step, ..., s_max`
//! and returns plain `Float64Array`s so the page can draw them directly.

use rmt_spacing::fitting::{fit_lambda, Tabulated, DEFAULT_TOLERANCE};
use rmt_spacing::fredholm::{gap_to_lsd, source_gap_curve, CurveSource, Grid};
use rmt_spacing::kernels::{lambda_big_to_rho, KernelSpec};
use rmt_spacing::surmise::SurmiseSpec;
use rmt_spacing::Result;
use wasm_bindgen::prelude::*;

/// Largest quadrature order the page may request; keeps a click under a second.
pub const MAX_DEMO_M: usize = 120;

pub fn grid_points(s_max: f64, step: f64) -> Result<Vec<f64>> {
    Ok(Grid::uniform(s_max, step)?.points().to_vec())
}

pub fn surmise_values(lambda: f64, s_max: f64, step: f64) -> Result<Vec<f64>> {
    let spec = SurmiseSpec::crossover(lambda)?;
    Ok(grid_points(s_max, step)?.into_iter().map(|s| spec.density(s)).collect())
}

fn crossover_lsd(lambda_big: f64, m: usize, s_max: f64, step: f64) -> Result<Tabulated> {
    if m > MAX_DEMO_M {
        return Err(rmt_spacing::Error::InvalidArgument(format!(
            "m = {m} is above the demo limit {MAX_DEMO_M}"
        )));
    }
    let source = CurveSource::Kernel {
        kernel: KernelSpec::dynamical(lambda_big_to_rho(lambda_big)?)?,
    };
    let gap = source_gap_curve(&source, &Grid::uniform(s_max, step)?, m)?;
    Ok(Tabulated::from_lsd(&gap_to_lsd(&gap)?))
}

pub fn exact_values(lambda_big: f64, m: usize, s_max: f64, step: f64) -> Result<Vec<f64>> {
    Ok(crossover_lsd(lambda_big, m, s_max, step)?.values)
}

/// `[lambda*, Delta_2]` of the surmise fit to the exact curve on `[0, s_max]`.
pub fn fit_values(lambda_big: f64, m: usize, s_max: f64, step: f64) -> Result<Vec<f64>> {
    let lsd = crossover_lsd(lambda_big, m, s_max, step)?;
    let fit = fit_lambda(&lsd, (0.0, s_max), DEFAULT_TOLERANCE)?;
    Ok(vec![fit.lambda_star, fit.delta2])
}

fn js(r: Result<Vec<f64>>) -> Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = gridPoints)]
pub fn grid_points_js(s_max: f64, step: f64) -> Result<Vec<f64>, JsError> {
    js(grid_points(s_max, step))
}

/// Crossover surmise density at surmise parameter `lambda`.
#[wasm_bindgen(js_name = surmiseCurve)]
pub fn surmise_curve(lambda: f64, s_max: f64, step: f64) -> Result<Vec<f64>, JsError> {
    js(surmise_values(lambda, s_max, step))
}

/// Exact large-N crossover spacing density at transition parameter `lambda_big`.
#[wasm_bindgen(js_name = exactCurve)]
pub fn exact_curve(lambda_big: f64, m: usize, s_max: f64, step: f64) -> Result<Vec<f64>, JsError> {
    js(exact_values(lambda_big, m, s_max, step))
}

#[wasm_bindgen(js_name = fitLambda)]
pub fn fit_lambda_js(lambda_big: f64, m: usize, s_max: f64, step: f64) -> Result<Vec<f64>, JsError> {
    js(fit_values(lambda_big, m, s_max, step))
}
