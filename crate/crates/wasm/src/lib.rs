//! Browser bindings: each call samples a function spec on `[start, end)`
//! with `count` cells and returns one value per cell.
//!
//! The `*_values` functions hold the logic and run natively; the exported
//! wrappers only convert errors for JavaScript.

use onesided::grid::{sample_function, FunctionSpec, Grid, SampledFunction};
use onesided::operators::KernelSpec;
use onesided::verify::Expr;
use wasm_bindgen::prelude::*;

/// Cap on cells so that a slider cannot stall the page.
pub const MAX_CELLS: usize = 1 << 14;

fn sampled(spec: &str, start: f64, end: f64, count: usize) -> Result<SampledFunction, String> {
    if count > MAX_CELLS {
        return Err(format!("at most {MAX_CELLS} cells"));
    }
    let grid = Grid::spanning(start, end, count).map_err(|e| e.to_string())?;
    let spec: FunctionSpec = spec.parse().map_err(|e: onesided::Error| e.to_string())?;
    if matches!(spec, FunctionSpec::Csv(_)) {
        return Err("csv functions are not available in the browser".into());
    }
    sample_function(&spec, &grid).map_err(|e| e.to_string())
}

fn evaluate(expr: Expr, spec: &str, start: f64, end: f64, count: usize) -> Result<Vec<f64>, String> {
    let f = sampled(spec, start, end, count)?;
    Ok(expr.eval(&f).map_err(|e| e.to_string())?.values)
}

pub fn sample_values(spec: &str, start: f64, end: f64, count: usize) -> Result<Vec<f64>, String> {
    Ok(sampled(spec, start, end, count)?.values)
}

pub fn maximal_plus_values(spec: &str, start: f64, end: f64, count: usize) -> Result<Vec<f64>, String> {
    evaluate(Expr::maximal(Expr::Identity), spec, start, end, count)
}

pub fn kernel_values(spec: &str, kernel: &str, start: f64, end: f64, count: usize) -> Result<Vec<f64>, String> {
    if kernel.starts_with("table:") {
        return Err("tabulated kernels are not available in the browser".into());
    }
    let kernel: KernelSpec = kernel.parse().map_err(|e: onesided::Error| e.to_string())?;
    evaluate(Expr::apply(Expr::Identity, kernel), spec, start, end, count)
}

pub fn square_values(spec: &str, start: f64, end: f64, count: usize) -> Result<Vec<f64>, String> {
    let expr = Expr::Square {
        of: Box::new(Expr::Identity),
        range: None,
    };
    evaluate(expr, spec, start, end, count)
}

fn js(r: Result<Vec<f64>, String>) -> Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sample(spec: &str, start: f64, end: f64, count: usize) -> Result<Vec<f64>, JsError> {
    js(sample_values(spec, start, end, count))
}

/// `M^+f` at cell left boundaries.
#[wasm_bindgen(js_name = maximalPlus)]
pub fn maximal_plus(spec: &str, start: f64, end: f64, count: usize) -> Result<Vec<f64>, JsError> {
    js(maximal_plus_values(spec, start, end, count))
}

/// `T^+f` for a kernel in the `difftrans:`/`frac:` grammar.
#[wasm_bindgen(js_name = applyKernel)]
pub fn apply_kernel(spec: &str, kernel: &str, start: f64, end: f64, count: usize) -> Result<Vec<f64>, JsError> {
    js(kernel_values(spec, kernel, start, end, count))
}

/// `S^+f` over the default dyadic range.
#[wasm_bindgen(js_name = squareFunction)]
pub fn square_function(spec: &str, start: f64, end: f64, count: usize) -> Result<Vec<f64>, JsError> {
    js(square_values(spec, start, end, count))
}
