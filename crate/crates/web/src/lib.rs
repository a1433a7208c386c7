//! Browser demo. Each operation parses a JSON config and returns a flat
//! array that the page draws on a canvas.

use cbve::config::{parse_config, Model};
use cbve::moments::solve_moment;
use cbve::solver::{solve_general, solve_special, SolverOptions};
use cbve::verify::{phi_n_gaps, LADDER};
use wasm_bindgen::prelude::*;

fn flatten(rows: impl Iterator<Item = (f64, [f64; 2])>) -> Vec<f64> {
    rows.flat_map(|(r, v)| [r, v[0], v[1]]).collect()
}

/// `v_{r,t}(lambda)` at every grid node as `[r0, v1, v2, r1, v1, v2, ...]`.
pub fn cumulant_rows(config: &str, t: f64, lambda: [f64; 2]) -> Result<Vec<f64>, String> {
    let cfg = parse_config(config).map_err(|e| e.to_string())?;
    let opts = SolverOptions::default();
    let sol = match &cfg.model {
        Model::General(env) => solve_general(env, t, lambda, &opts),
        Model::Special(sf) => solve_special(sf, t, lambda, &opts),
    }
    .map_err(|e| e.to_string())?;
    Ok(flatten(sol.rows()))
}

/// First moments `pi_{r,t}(lambda)` in the same layout; `lambda` may be signed.
pub fn moment_rows(config: &str, t: f64, lambda: [f64; 2]) -> Result<Vec<f64>, String> {
    let env = parse_config(config).and_then(|c| c.model.environment()).map_err(|e| e.to_string())?;
    let sol = solve_moment(&env, t, lambda).map_err(|e| e.to_string())?;
    Ok(flatten(sol.rows()))
}

/// `[n, gap, ...]` for the approximation ladder n = 1, 2, ..., 32.
pub fn ladder_rows(config: &str, t: f64, lambda: [f64; 2]) -> Result<Vec<f64>, String> {
    let env = parse_config(config).and_then(|c| c.model.environment()).map_err(|e| e.to_string())?;
    env.ensure_admissible().map_err(|e| e.to_string())?;
    let gaps = phi_n_gaps(&env, t, lambda, &LADDER, &SolverOptions::default()).map_err(|e| e.to_string())?;
    Ok(gaps.into_iter().flat_map(|(n, g)| [f64::from(n), g]).collect())
}

#[wasm_bindgen]
pub fn cumulant(config: &str, t: f64, l1: f64, l2: f64) -> Result<Vec<f64>, JsError> {
    cumulant_rows(config, t, [l1, l2]).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn moments(config: &str, t: f64, l1: f64, l2: f64) -> Result<Vec<f64>, JsError> {
    moment_rows(config, t, [l1, l2]).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ladder(config: &str, t: f64, l1: f64, l2: f64) -> Result<Vec<f64>, JsError> {
    ladder_rows(config, t, [l1, l2]).map_err(|e| JsError::new(&e))
}
