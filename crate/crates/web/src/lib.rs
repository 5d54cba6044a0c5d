//! Browser bindings for three small demonstrations: prompt adaptation on a
//! block-model graph, complementary labels on planar clusters, and accuracy
//! under edge dropping.
//!
//! Each export returns a JSON string so the page needs no generated glue
//! beyond what `wasm-bindgen` emits. The same functions are callable natively
//! through [`demo`], which is what the tests exercise.

pub mod demo;

use wasm_bindgen::prelude::*;

fn to_json<T: serde::Serialize>(r: tgprompt::error::Result<T>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

/// Pre-trains on one block-model graph and adapts to another.
#[wasm_bindgen]
pub fn adapt(seed: u64, feature_shift: f64) -> Result<String, JsError> {
    to_json(demo::adaptation(seed, feature_shift))
}

/// Three planar clusters with one labelled point each.
#[wasm_bindgen]
pub fn complementary(seed: u64, spread: f64) -> Result<String, JsError> {
    to_json(demo::complementary(seed, spread))
}

/// Test accuracy with and without tuning at comma-separated drop rates.
#[wasm_bindgen]
pub fn perturbation_sweep(seed: u64, rates: &str) -> Result<String, JsError> {
    let rates = rates
        .split(',')
        .map(|r| r.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| JsError::new(&format!("drop rates: {e}")))?;
    to_json(demo::perturbation_sweep(seed, &rates))
}
