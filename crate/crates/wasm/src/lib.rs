//! Browser bindings for the demo page in `www/`.
//!
//! Each export has a plain Rust twin returning `Result<_, String>` so the
//! numbers can be tested off the browser.

use swarmloc::bounds::{
    expected_local_locality, expected_local_random_dense, expected_local_random_sparse, BoundInputs, Mode,
};
use swarmloc::datamodel::ChunkParams;
use swarmloc::matching::{run_completion_simulation, solve_bmatching, uniform_swarm, MatchingProblem};
use wasm_bindgen::prelude::*;

/// Rows of `[l, random_sparse, random_dense, locality_sparse, locality_dense]`
/// for `l = 1..=n`, as fractions of `k`, flattened.
pub fn bounds_table(n: u64, neighborhood: u64, slots: u64) -> Result<Vec<f64>, String> {
    let mut out = Vec::with_capacity(5 * n as usize);
    for l in 1..=n {
        let b = BoundInputs::new(n, l, neighborhood, slots).map_err(|e| e.to_string())?;
        let k = slots as f64;
        out.extend([
            l as f64,
            expected_local_random_sparse(&b) / k,
            expected_local_random_dense(&b) / k,
            expected_local_locality(&b, Mode::Sparse) / k,
            expected_local_locality(&b, Mode::Dense) / k,
        ]);
    }
    Ok(out)
}

/// Matched pairs `(a, b)` of a complete graph with speeds `base + step * i`,
/// flattened. Indices are speed ranks.
pub fn unchoke_pairs(n: usize, base_kbps: f64, step_kbps: f64, slots: usize) -> Result<Vec<u32>, String> {
    if !(2..=400).contains(&n) || !(base_kbps > 0.0 && step_kbps > 0.0) {
        return Err("need 2..=400 nodes and positive speeds".into());
    }
    let speeds: Vec<f64> = (0..n).map(|i| base_kbps + step_kbps * i as f64).collect();
    let edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b)));
    let p = MatchingProblem::new(speeds, vec![slots; n], edges).map_err(|e| e.to_string())?;
    let m = solve_bmatching(&p);
    Ok(m.pairs.iter().flat_map(|&(a, b)| [a as u32, b as u32]).collect())
}

/// Rows of `[sim_time_sec, capacity / baseline, completed_nodes]`, flattened.
pub fn completion_rows(n: usize, lo_kbps: f64, hi_kbps: f64, total_chunks: u64, seed: u64) -> Result<Vec<f64>, String> {
    if n > 200 {
        return Err("at most 200 nodes".into());
    }
    let chunk = ChunkParams {
        total_chunks,
        ..ChunkParams::default()
    };
    let c0 = (total_chunks as f64 / 100.0).max(2.0);
    let (p, s0) = uniform_swarm(n, lo_kbps, hi_kbps, c0, chunk.regular_slots, seed).map_err(|e| e.to_string())?;
    let tr = run_completion_simulation(&p, &chunk, s0, 1000, seed).map_err(|e| e.to_string())?;
    Ok(tr
        .rows
        .iter()
        .flat_map(|r| [r.sim_time_sec, r.capacity_kbps / tr.baseline_capacity_kbps, r.completed as f64])
        .collect())
}

#[wasm_bindgen]
pub fn bounds_curves(n: u32, neighborhood: u32, slots: u32) -> Result<Vec<f64>, JsError> {
    bounds_table(n as u64, neighborhood as u64, slots as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn unchoke_pattern(n: u32, base_kbps: f64, step_kbps: f64, slots: u32) -> Result<Vec<u32>, JsError> {
    unchoke_pairs(n as usize, base_kbps, step_kbps, slots as usize).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn completion_trace(n: u32, lo_kbps: f64, hi_kbps: f64, total_chunks: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    completion_rows(n as usize, lo_kbps, hi_kbps, total_chunks as u64, seed as u64).map_err(|e| JsError::new(&e))
}
