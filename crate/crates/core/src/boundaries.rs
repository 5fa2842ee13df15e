//! Investment-trigger surfaces and their base-capacity inverses.
//!
//! A firm using a reflection strategy invests exactly enough to keep the
//! shock at or below its trigger `X(q_i, q_mi)`. The base capacity
//! `phi(x, q_mi)` is the smallest own capital whose trigger is at least `x`,
//! so that `q_i < phi(x, q_mi)` iff `x > X(q_i, q_mi)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Relative slack accepted when comparing a capital to the admissible floor.
const FLOOR_SLACK: f64 = 1e-12;
/// Relative tolerance of the bisection root finders.
const ROOT_RTOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;

/// The built-in boundary families, in the form used by configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryKind {
    /// Invest whenever the price `x P(q_i + q_mi)` exceeds `p`.
    ConstantPrice { p: f64 },
    /// `X(q_i, q_mi) = (p* + c / max(q_i, q_mi)) / P(q_i + q_mi)` on
    /// capitals at least `c (2 gamma - 1) / p*`.
    DynamicC { c: f64 },
    /// Never invest.
    Infinite,
}

/// A trigger surface bound to a parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boundary {
    pub kind: BoundaryKind,
    pub params: ModelParams,
}

impl Boundary {
    pub fn new(params: ModelParams, kind: BoundaryKind) -> Result<Self> {
        match kind {
            BoundaryKind::ConstantPrice { p } if !(p > 0.0 && p.is_finite()) => {
                return Err(Error::ParamDomain(format!(
                    "price threshold must be positive, got {p}"
                )))
            }
            BoundaryKind::DynamicC { c } if !(c >= 0.0 && c.is_finite()) => {
                return Err(Error::ParamDomain(format!(
                    "dynamic offset c must be nonnegative, got {c}"
                )))
            }
            _ => {}
        }
        Ok(Self { kind, params })
    }

    pub fn constant_price(params: ModelParams, p: f64) -> Result<Self> {
        Self::new(params, BoundaryKind::ConstantPrice { p })
    }

    pub fn dynamic_c(params: ModelParams, c: f64) -> Result<Self> {
        Self::new(params, BoundaryKind::DynamicC { c })
    }

    pub fn infinite(params: ModelParams) -> Self {
        Self {
            kind: BoundaryKind::Infinite,
            params,
        }
    }

    /// Minimum admissible capital. Zero except for the dynamic family.
    pub fn q_floor(&self) -> f64 {
        match self.kind {
            BoundaryKind::DynamicC { c } => self.params.capital_floor(c),
            _ => 0.0,
        }
    }

    /// `Some(p)` if the trigger is a constant price threshold, including the
    /// degenerate dynamic family `c = 0`, which is the threshold `p*`.
    pub fn constant_threshold(&self) -> Option<f64> {
        match self.kind {
            BoundaryKind::ConstantPrice { p } => Some(p),
            BoundaryKind::DynamicC { c: 0.0 } => Some(self.params.p_star),
            _ => None,
        }
    }

    /// Supremum of the price `x P` over the no-investment region.
    pub fn price_cap(&self) -> f64 {
        match self.kind {
            BoundaryKind::ConstantPrice { p } => p,
            BoundaryKind::DynamicC { c: 0.0 } => self.params.p_star,
            BoundaryKind::DynamicC { .. } => {
                let g = self.params.gamma;
                self.params.p_star * 2.0 * g / (2.0 * g - 1.0)
            }
            BoundaryKind::Infinite => f64::INFINITY,
        }
    }

    fn check_floor(&self, q: f64) -> Result<()> {
        let floor = self.q_floor();
        if q < floor * (1.0 - FLOOR_SLACK) {
            return Err(Error::DomainBelowFloor { q, floor });
        }
        Ok(())
    }

    /// Trigger `X(q_i, q_mi)`. Returns `+inf` for the infinite boundary.
    pub fn trigger(&self, q_i: f64, q_mi: f64) -> Result<f64> {
        let g = self.params.gamma;
        match self.kind {
            BoundaryKind::Infinite => Ok(f64::INFINITY),
            BoundaryKind::ConstantPrice { p } => {
                let total = positive_total(q_i, q_mi)?;
                Ok(p * total.powf(1.0 / g))
            }
            BoundaryKind::DynamicC { c } => {
                self.check_floor(q_i)?;
                self.check_floor(q_mi)?;
                let total = positive_total(q_i, q_mi)?;
                let markup = if c == 0.0 { 0.0 } else { c / q_i.max(q_mi) };
                Ok((self.params.p_star + markup) * total.powf(1.0 / g))
            }
        }
    }

    /// Partial derivatives `(dX/dq_i, dX/dq_mi)`. On the diagonal of the
    /// dynamic family, where `max(q_i, q_mi)` kinks, the `q_i >= q_mi` side
    /// is used. Zero for the infinite boundary.
    pub fn trigger_gradient(&self, q_i: f64, q_mi: f64) -> Result<(f64, f64)> {
        let g = self.params.gamma;
        match self.kind {
            BoundaryKind::Infinite => Ok((0.0, 0.0)),
            BoundaryKind::ConstantPrice { p } => {
                let total = positive_total(q_i, q_mi)?;
                let d = p / g * total.powf(1.0 / g - 1.0);
                Ok((d, d))
            }
            BoundaryKind::DynamicC { c } => {
                self.check_floor(q_i)?;
                self.check_floor(q_mi)?;
                let total = positive_total(q_i, q_mi)?;
                let scale = total.powf(1.0 / g - 1.0);
                let p_star = self.params.p_star;
                if c == 0.0 {
                    let d = p_star / g * scale;
                    return Ok((d, d));
                }
                if q_i >= q_mi {
                    let m = p_star + c / q_i;
                    Ok(((m / g - c * total / (q_i * q_i)) * scale, m / g * scale))
                } else {
                    let m = p_star + c / q_mi;
                    Ok((m / g * scale, (m / g - c * total / (q_mi * q_mi)) * scale))
                }
            }
        }
    }

    /// Trigger on the diagonal, `X(q, q)`.
    pub fn symmetric_trigger(&self, q: f64) -> Result<f64> {
        self.trigger(q, q)
    }

    /// Base capacity `phi(x, q_mi) = inf { q >= 0 : x <= X(q, q_mi) }`.
    ///
    /// For the dynamic family the infimum is taken over admissible capitals;
    /// when `x` does not exceed the trigger at the floor no investment is
    /// required from any admissible capital and the result is `0`.
    pub fn base_capacity(&self, x: f64, q_mi: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::ParamDomain(format!(
                "shock level must be positive, got {x}"
            )));
        }
        let g = self.params.gamma;
        match self.kind {
            BoundaryKind::Infinite => Ok(0.0),
            BoundaryKind::ConstantPrice { p } => Ok(((x / p).powf(g) - q_mi).max(0.0)),
            BoundaryKind::DynamicC { c: 0.0 } => {
                Ok(((x / self.params.p_star).powf(g) - q_mi).max(0.0))
            }
            BoundaryKind::DynamicC { c } => {
                self.check_floor(q_mi)?;
                let floor = self.q_floor();
                if x <= self.trigger(floor, q_mi)? {
                    return Ok(0.0);
                }
                let p_star = self.params.p_star;
                // p* <= X P <= p* + c / max(floor, q_mi) on the domain.
                let hi = (x / p_star).powf(g) - q_mi;
                let lo = ((x / (p_star + c / floor.max(q_mi))).powf(g) - q_mi).max(floor);
                Ok(bisect_increasing(
                    |q| self.trigger(q, q_mi).unwrap_or(f64::INFINITY),
                    x,
                    lo,
                    hi,
                ))
            }
        }
    }

    /// Smallest symmetric capital keeping the diagonal trigger at or above `x`,
    /// clamped at the admissible floor. Only defined for the dynamic family.
    pub fn psi(&self, x: f64) -> Result<f64> {
        let c = match self.kind {
            BoundaryKind::DynamicC { c } => c,
            other => {
                return Err(Error::KindMismatch(format!(
                    "psi requires a dynamic_c boundary, got {other:?}"
                )))
            }
        };
        if !(x > 0.0) {
            return Err(Error::ParamDomain(format!(
                "shock level must be positive, got {x}"
            )));
        }
        let g = self.params.gamma;
        let p_star = self.params.p_star;
        if c == 0.0 {
            return Ok(0.5 * (x / p_star).powf(g));
        }
        let floor = self.q_floor();
        if x <= self.symmetric_trigger(floor)? {
            return Ok(floor);
        }
        let hi = 0.5 * (x / p_star).powf(g);
        let lo = (0.5 * (x / (p_star + c / floor)).powf(g)).max(floor);
        Ok(bisect_increasing(
            |q| self.symmetric_trigger(q).unwrap_or(f64::INFINITY),
            x,
            lo,
            hi,
        ))
    }
}

fn positive_total(q_i: f64, q_mi: f64) -> Result<f64> {
    let total = q_i + q_mi;
    if !(total > 0.0) {
        return Err(Error::DomainZeroCapacity(total));
    }
    Ok(total)
}

/// Smallest `q` in `[lo, ...)` with `f(q) >= target`, for `f` strictly
/// increasing and `f(lo) <= target`. The returned point always satisfies
/// `f(q) >= target`.
fn bisect_increasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    if !(hi > lo) {
        hi = lo.max(f64::MIN_POSITIVE);
    }
    // The analytic brackets should already hold; widen geometrically if
    // rounding put `hi` on the wrong side.
    let mut width = (hi - lo).max(ROOT_RTOL * hi.max(1.0));
    while f(hi) < target {
        lo = hi;
        width *= 2.0;
        hi += width;
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= ROOT_RTOL * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}
