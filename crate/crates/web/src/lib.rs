//! Browser bindings: every export takes plain numbers or JSON text and returns JSON text.

use parisi_core::pde::PdeOptions;
use parisi_core::simulator::coupled_ground_states;
use parisi_core::{minimize_parisi, MixtureSpec, PDESolution, ParisiOptions, SpatialGrid, StepGamma};
use serde_json::json;
use wasm_bindgen::prelude::*;

// Coarse settings: a browser tab is single-threaded and should answer within seconds.
const GRID_POINTS: usize = 1025;
const PROFILE_SAMPLES: usize = 161;
const MAX_BROWSER_SPINS: usize = 18;

fn sk() -> MixtureSpec {
    MixtureSpec::sk()
}

/// Phi, Phi_x, Phi_xx at s = 0 over x in [-4, 4] for the SK mixture.
pub fn profile_json(h: f64, gamma: &str) -> Result<String, String> {
    let gamma: StepGamma = serde_json::from_str(gamma).map_err(|e| format!("gamma: {e}"))?;
    let spec = sk();
    let grid = SpatialGrid::with_points(&spec, h, GRID_POINTS);
    let sol = PDESolution::solve(&spec, &gamma, &grid, PdeOptions::default(), true).map_err(|e| e.to_string())?;
    let mut x = Vec::with_capacity(PROFILE_SAMPLES);
    let mut values = [Vec::new(), Vec::new(), Vec::new()];
    for i in 0..PROFILE_SAMPLES {
        let xi = -4.0 + 8.0 * i as f64 / (PROFILE_SAMPLES - 1) as f64;
        let v = sol.eval_all(0.0, xi).map_err(|e| e.to_string())?;
        x.push(xi);
        for d in 0..3 {
            values[d].push(v[d]);
        }
    }
    let at_h = sol.eval_all(0.0, h).map_err(|e| e.to_string())?[0];
    Ok(json!({ "x": x, "phi": values[0], "phi_x": values[1], "phi_xx": values[2], "phi_at_h": at_h }).to_string())
}

/// Minimizes the Parisi functional with `k` atoms at field `h`.
pub fn minimize_json(h: f64, k: usize) -> Result<String, String> {
    if !(1..=3).contains(&k) {
        return Err("k must be 1, 2 or 3".into());
    }
    let opts = ParisiOptions { k_atoms: k, starts: 8, search_points: 257, grid_points: GRID_POINTS, ..ParisiOptions::default() };
    let r = minimize_parisi(&sk(), h, &opts).map_err(|e| e.to_string())?;
    Ok(json!({ "M": r.m, "M_prime": r.m_prime, "E": r.e, "q_h": r.q_h, "gamma": r.gamma_h }).to_string())
}

/// Exact maximizers of two SK systems sharing a fraction t of their disorder.
pub fn coupled_json(n: usize, t: f64, h: f64, seed: u64) -> Result<String, String> {
    if n == 0 || n > MAX_BROWSER_SPINS {
        return Err(format!("N must be between 1 and {MAX_BROWSER_SPINS}"));
    }
    let out = coupled_ground_states(&sk(), n, t, h, seed).map_err(|e| e.to_string())?;
    Ok(json!({ "sigma1": out.sigma1.to_string(), "sigma2": out.sigma2.to_string(), "r12": out.r12 }).to_string())
}

#[wasm_bindgen]
pub fn pde_profile(h: f64, gamma: &str) -> Result<String, JsError> {
    profile_json(h, gamma).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn minimize(h: f64, k: usize) -> Result<String, JsError> {
    minimize_json(h, k).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn coupled_maximizers(n: usize, t: f64, h: f64, seed: u32) -> Result<String, JsError> {
    coupled_json(n, t, h, seed as u64).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn profile_of_zero_gamma_is_even() {
        let v: Value = serde_json::from_str(&profile_json(0.0, "[[0.0, 0.0]]").unwrap()).unwrap();
        let phi = v["phi"].as_array().unwrap();
        assert_eq!(phi.len(), PROFILE_SAMPLES);
        let (a, b) = (phi[0].as_f64().unwrap(), phi[PROFILE_SAMPLES - 1].as_f64().unwrap());
        assert!((a - b).abs() < 1e-9);
        assert!((v["phi_at_h"].as_f64().unwrap() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn bad_inputs_are_messages() {
        assert!(profile_json(0.0, "[[0.5, 1.0]]").is_err());
        assert!(minimize_json(0.0, 7).is_err());
        assert!(coupled_json(40, 0.5, 0.0, 1).is_err());
    }

    #[test]
    fn identical_systems_at_full_coupling() {
        let v: Value = serde_json::from_str(&coupled_json(8, 1.0, 0.0, 3).unwrap()).unwrap();
        assert_eq!(v["r12"].as_f64().unwrap(), 1.0);
        assert_eq!(v["sigma1"], v["sigma2"]);
    }
}
