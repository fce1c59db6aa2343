//! Browser front end for `hardy-flow`. The `demo` functions are plain Rust
//! and return serializable views; the exported wrappers hand them to
//! JavaScript as JSON strings.

use wasm_bindgen::prelude::*;

pub mod demo;

fn to_js<T: serde::Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

/// Fibering map and well classification of `amplitude * exp(-r^2/4)`.
#[wasm_bindgen]
pub fn fibering(dim: usize, mu: f64, amplitude: f64, m: usize) -> Result<String, JsValue> {
    to_js(demo::fibering(dim, mu, amplitude, m))
}

/// Trace of the flow started from `amplitude * exp(-r^2/4)`.
#[wasm_bindgen]
pub fn evolve_gaussian(
    dim: usize,
    mu: f64,
    amplitude: f64,
    m: usize,
    s_max: f64,
) -> Result<String, JsValue> {
    to_js(demo::evolve_gaussian(dim, mu, amplitude, m, s_max))
}

/// Hardy quotients of the witness family on an `m`-cell grid.
#[wasm_bindgen]
pub fn hardy_sweep(dim: usize, m: usize, raw: bool) -> Result<String, JsValue> {
    to_js(demo::hardy_sweep(dim, m, raw))
}
