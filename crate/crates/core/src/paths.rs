//! GBM shock paths and running suprema.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// A GBM trajectory sampled on the grid `t_k = k * dt`, `k = 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockPath {
    pub x0: f64,
    pub dt: f64,
    pub horizon: f64,
    pub values: Vec<f64>,
    pub seed: u64,
    pub path_index: u64,
}

impl ShockPath {
    /// Number of steps (the grid has `steps() + 1` points).
    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("path has at least one point")
    }
}

/// Number of grid steps for a horizon, rejecting non-positive inputs.
pub fn step_count(dt: f64, horizon: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::ParamDomain(format!("dt must be positive, got {dt}")));
    }
    if !(horizon >= dt) || !horizon.is_finite() {
        return Err(Error::ParamDomain(format!(
            "horizon {horizon} must be at least dt {dt}"
        )));
    }
    Ok((horizon / dt).round() as usize)
}

/// The random stream for one path: ChaCha8 keyed by the master seed, with
/// the path index selecting the stream. Independent of worker count.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Samples a path with exact log-normal steps:
/// `ln X_{k+1} - ln X_k ~ N((mu - sigma^2/2) dt, sigma^2 dt)`.
pub fn generate_path(
    params: &ModelParams,
    x0: f64,
    dt: f64,
    horizon: f64,
    seed: u64,
    path_index: u64,
) -> Result<ShockPath> {
    if !(x0 > 0.0) || !x0.is_finite() {
        return Err(Error::ParamDomain(format!(
            "initial shock must be positive, got {x0}"
        )));
    }
    let n = step_count(dt, horizon)?;
    let mut values = Vec::with_capacity(n + 1);
    fill_path(params, x0, dt, n, seed, path_index, &mut values);
    Ok(ShockPath {
        x0,
        dt,
        horizon,
        values,
        seed,
        path_index,
    })
}

/// Writes `n + 1` grid values into `out`, reusing its allocation.
pub fn fill_path(
    params: &ModelParams,
    x0: f64,
    dt: f64,
    n: usize,
    seed: u64,
    path_index: u64,
    out: &mut Vec<f64>,
) {
    let drift = (params.mu - 0.5 * params.sigma * params.sigma) * dt;
    let vol = params.sigma * dt.sqrt();
    let mut rng = path_rng(seed, path_index);
    out.clear();
    out.push(x0);
    let mut log_x = 0.0;
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        log_x += drift + vol * z;
        out.push(x0 * log_x.exp());
    }
}

/// Running maximum of a stream of values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunningSup {
    current: f64,
}

impl RunningSup {
    pub fn new(first: f64) -> Self {
        Self { current: first }
    }

    pub fn value(&self) -> f64 {
        self.current
    }

    pub fn update(&mut self, v: f64) -> f64 {
        if v > self.current {
            self.current = v;
        }
        self.current
    }
}

pub fn running_sup_update(state: RunningSup, new_value: f64) -> RunningSup {
    let mut s = state;
    s.update(new_value);
    s
}

/// Prefix maxima of `values`.
pub fn running_sup(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc: Option<RunningSup> = None;
    for &v in values {
        let s = match acc {
            None => RunningSup::new(v),
            Some(s) => running_sup_update(s, v),
        };
        out.push(s.value());
        acc = Some(s);
    }
    out
}

/// `int_0^T e^{-rt} sup_{s<=t} X_s^gamma dt` on the grid (midpoint discounting,
/// left-point supremum). A finite-horizon proxy for the integrability of the
/// capital a constant-price reflection strategy accumulates.
pub fn discounted_sup_power_integral(path: &ShockPath, r: f64, gamma: f64) -> f64 {
    let dt = path.dt;
    let mut sup = RunningSup::new(path.values[0].powf(gamma));
    let mut total = 0.0;
    for k in 0..path.steps() {
        let s = sup.value();
        total += (-r * (path.time(k) + 0.5 * dt)).exp() * s * dt;
        sup.update(path.values[k + 1].powf(gamma));
    }
    total
}

/// Debug dump: `t,x` rows with a header.
pub fn write_path_csv<W: Write>(path: &ShockPath, mut w: W) -> io::Result<()> {
    writeln!(w, "t,x")?;
    for (k, x) in path.values.iter().enumerate() {
        writeln!(w, "{:.16e},{:.16e}", path.time(k), x)?;
    }
    Ok(())
}
