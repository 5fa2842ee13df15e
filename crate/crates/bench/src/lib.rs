//! Shared fixtures for the benchmarks.

use capgame::{derive_params, generate_path, ModelParams, ShockPath};

pub fn golden() -> ModelParams {
    derive_params(1.0, 0.0, 2f64.sqrt(), 1.5).expect("golden parameters are valid")
}

/// A path that starts at the symmetric trigger region of unit capitals.
pub fn sample_path(m: &ModelParams, dt: f64, horizon: f64, index: u64) -> ShockPath {
    generate_path(m, m.p_star, dt, horizon, 1, index).expect("valid path settings")
}
