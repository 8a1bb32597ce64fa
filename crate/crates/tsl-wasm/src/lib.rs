//! WebAssembly bindings for the static demo page.
//!
//! Each exported function returns a JSON string so that the page can render
//! results without additional glue types.

use serde_json::json;
use tsl::bubbles::{interaction_integral, Bubble};
use tsl::constants::{
    escobar_constant, reduction_constant, sharp_trace_constant, EscobarParams, TraceParams,
};
use tsl::lab::{one_bubble_quotient_scan, symmetric_direction};
use wasm_bindgen::prelude::*;

fn to_js(v: tsl::Result<serde_json::Value>) -> std::result::Result<String, JsError> {
    v.map(|j| j.to_string())
        .map_err(|e| JsError::new(&e.to_string()))
}

/// Sharp trace constant, reduction constant and reduced constant for (n, m, α).
pub fn constants_json(n: usize, m: usize, alpha: f64) -> tsl::Result<serde_json::Value> {
    let p = TraceParams::new(n, m, alpha)?;
    let s = sharp_trace_constant(&p)?;
    let r = reduction_constant(&p)?;
    let reduced = sharp_trace_constant(&p.reduced())?;
    let escobar = if n >= 3 {
        Some(escobar_constant(n)?)
    } else {
        None
    };
    Ok(
        json!({ "sharp": s, "reduction": r, "reduced": reduced, "product": r * reduced, "escobar": escobar }),
    )
}

/// Interaction ∫U₁^p U₂ of two unit bubbles at distance μ^{−1/2}.
pub fn interaction_json(n: usize, mu: f64) -> tsl::Result<serde_json::Value> {
    let e = EscobarParams::new(n)?;
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(tsl::TslError::Parameter(format!(
            "mu = {mu} must lie in (0, 1]"
        )));
    }
    let mut z = vec![0.0; n - 1];
    z[0] = 1.0 / mu.sqrt();
    let v = interaction_integral(&Bubble::standard(n), &Bubble::new(z, 1.0)?, e.p(), 1.0)?;
    Ok(json!({ "mu": mu, "interaction": v, "predicted_power": e.half() }))
}

/// One-bubble quotient scan along the standard degree-2 direction.
pub fn quotient_scan_json(n: usize, epsilons: &[f64]) -> tsl::Result<serde_json::Value> {
    let r = one_bubble_quotient_scan(n, &symmetric_direction(n), "symmetric", epsilons)?;
    Ok(serde_json::to_value(r).unwrap_or(serde_json::Value::Null))
}

/// JS binding of [`constants_json`].
#[wasm_bindgen]
pub fn constants(n: usize, m: usize, alpha: f64) -> std::result::Result<String, JsError> {
    to_js(constants_json(n, m, alpha))
}

/// JS binding of [`interaction_json`].
#[wasm_bindgen]
pub fn interaction(n: usize, mu: f64) -> std::result::Result<String, JsError> {
    to_js(interaction_json(n, mu))
}

/// JS binding of [`quotient_scan_json`].
#[wasm_bindgen]
pub fn quotient_scan(n: usize, epsilons: Vec<f64>) -> std::result::Result<String, JsError> {
    to_js(quotient_scan_json(n, &epsilons))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_for_escobar_case() {
        let v = constants_json(3, 1, 1.0).unwrap();
        assert!((v["sharp"].as_f64().unwrap() - 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn interaction_is_positive() {
        assert!(
            interaction_json(3, 1e-2).unwrap()["interaction"]
                .as_f64()
                .unwrap()
                > 0.0
        );
    }

    #[test]
    fn quotient_scan_limit() {
        let v = quotient_scan_json(3, &[0.01, 0.02, 0.04, 0.08]).unwrap();
        assert!((v["extrapolated_limit"].as_f64().unwrap() - 0.4).abs() < 1e-3);
    }
}
