//! Model primitives: discounting, GBM shock, constant-elasticity demand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The four primitives as they appear in configuration files.
///
/// Derived constants are never read from input; build a [`ModelParams`] with
/// [`Primitives::derive`] instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Primitives {
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
    pub gamma: f64,
}

impl Primitives {
    pub fn derive(self) -> Result<ModelParams> {
        derive_params(self.r, self.mu, self.sigma, self.gamma)
    }
}

/// Validated model parameters with derived constants.
///
/// Immutable after construction. `beta` is the positive root of
/// `sigma^2/2 * b^2 + (mu - sigma^2/2) * b - r = 0`, `p_star` the zero-NPV
/// price threshold `(r - mu) * beta / (beta - 1)` and `mu_gamma` the growth
/// rate of `X^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub r: f64,
    pub mu: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub beta: f64,
    pub p_star: f64,
    pub mu_gamma: f64,
}

/// A point of the state space: shock level and the two capital stocks, seen
/// from firm `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub q_i: f64,
    pub q_mi: f64,
}

impl State {
    pub fn new(x: f64, q_i: f64, q_mi: f64) -> Self {
        Self { x, q_i, q_mi }
    }

    pub fn total(&self) -> f64 {
        self.q_i + self.q_mi
    }

    /// The same state seen from the opponent.
    pub fn swapped(&self) -> Self {
        Self {
            x: self.x,
            q_i: self.q_mi,
            q_mi: self.q_i,
        }
    }
}

/// Positive root of `sigma^2/2 * b^2 + (mu - sigma^2/2) * b - r = 0`.
///
/// Uses the cancellation-free branch of the quadratic formula, then one
/// Newton step to clean up the last ulp. Requires `r > 0` and `sigma != 0`.
pub fn positive_root(r: f64, mu: f64, sigma: f64) -> f64 {
    let a = 0.5 * sigma * sigma;
    let b = mu - a;
    let disc = (b * b + 4.0 * a * r).sqrt();
    let root = if b >= 0.0 {
        2.0 * r / (b + disc)
    } else {
        (disc - b) / (2.0 * a)
    };
    let f = (a * root + b) * root - r;
    let df = 2.0 * a * root + b;
    if df != 0.0 {
        root - f / df
    } else {
        root
    }
}

/// `gamma*mu + gamma*(gamma-1)*sigma^2/2`, the drift rate of `X^gamma`.
pub fn mu_gamma(mu: f64, sigma: f64, gamma: f64) -> f64 {
    gamma * mu + gamma * (gamma - 1.0) * 0.5 * sigma * sigma
}

pub fn derive_params(r: f64, mu: f64, sigma: f64, gamma: f64) -> Result<ModelParams> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::ParamDomain(format!("r must be positive, got {r}")));
    }
    if !(gamma > 1.0) || !gamma.is_finite() {
        return Err(Error::ParamDomain(format!(
            "gamma must exceed 1, got {gamma}"
        )));
    }
    if sigma == 0.0 || !sigma.is_finite() {
        return Err(Error::ParamDomain(format!(
            "sigma must be nonzero and finite, got {sigma}"
        )));
    }
    if !mu.is_finite() {
        return Err(Error::ParamDomain(format!("mu must be finite, got {mu}")));
    }
    let mu_g = mu_gamma(mu, sigma, gamma);
    if !(r > mu_g) {
        return Err(Error::Integrability { r, mu_gamma: mu_g });
    }
    let beta = positive_root(r, mu, sigma);
    // r > mu_gamma implies beta > gamma > 1 and r > mu.
    let p_star = (r - mu) * beta / (beta - 1.0);
    Ok(ModelParams {
        r,
        mu,
        sigma,
        gamma,
        beta,
        p_star,
        mu_gamma: mu_g,
    })
}

impl ModelParams {
    pub fn primitives(&self) -> Primitives {
        Primitives {
            r: self.r,
            mu: self.mu,
            sigma: self.sigma,
            gamma: self.gamma,
        }
    }

    /// Residual of the characteristic quadratic at `beta`.
    pub fn beta_residual(&self) -> f64 {
        let a = 0.5 * self.sigma * self.sigma;
        (a * self.beta + (self.mu - a)) * self.beta - self.r
    }

    /// `r - mu`, the effective discount rate of a perpetuity growing with `X`.
    pub fn net_rate(&self) -> f64 {
        self.r - self.mu
    }

    /// Smallest admissible capital for the dynamic boundary family with offset `c`.
    pub fn capital_floor(&self, c: f64) -> f64 {
        c * (2.0 * self.gamma - 1.0) / self.p_star
    }

    /// `P(q) = q^(-1/gamma)`.
    pub fn inverse_demand(&self, q_total: f64) -> Result<f64> {
        if !(q_total > 0.0) {
            return Err(Error::DomainZeroCapacity(q_total));
        }
        Ok(q_total.powf(-1.0 / self.gamma))
    }

    /// `P'(q) = -(1/gamma) q^(-1/gamma - 1)`.
    pub fn inverse_demand_slope(&self, q_total: f64) -> Result<f64> {
        if !(q_total > 0.0) {
            return Err(Error::DomainZeroCapacity(q_total));
        }
        Ok(-q_total.powf(-1.0 / self.gamma - 1.0) / self.gamma)
    }

    /// Inverse of `P`: the total capacity at which the price equals `price`.
    pub fn demand(&self, price: f64) -> f64 {
        price.powf(-self.gamma)
    }

    /// Operating profit rate `x P(q_i + q_mi) q_i`.
    pub fn profit_flow(&self, state: &State) -> Result<f64> {
        Ok(state.x * self.inverse_demand(state.total())? * state.q_i)
    }

    /// `d pi / d q_i = x (P + q_i P')`.
    pub fn marginal_profit(&self, state: &State) -> Result<f64> {
        let q = state.total();
        Ok(state.x * (self.inverse_demand(q)? + state.q_i * self.inverse_demand_slope(q)?))
    }
}
