//! Candidate value functions and their partial derivatives.
//!
//! All three kinds share the same shape. Below the investment trigger the
//! value is `A x + B x^beta` with `A x = x P q_i / (r - mu)` the perpetuity
//! value of current profits and `B x^beta` the option component. Above it the
//! firm invests up to its base capacity `phi`, and the value is read off the
//! boundary: `V(x, q_i, q_mi) = V(x, phi(x, q_mi), q_mi) - phi + q_i`.
//!
//! * `Abs(p)`: the firm never invests while the opponent reflects at `p`.
//!   Above the boundary the value is the constant `(p/p*) q_i`.
//! * `Inv(p)`: the firm does all investing at threshold `p`; `B` is closed form.
//! * `C(c)`: the dynamic family. `B(q_i, q_mi) = -int_{q_i}^inf f(q, q_mi) dq`
//!   with `f = (1 - X (P' q + P) / (r - mu)) X^{-beta}`, evaluated by adaptive
//!   quadrature after the change of variable `w = (q + q_mi)^{-(beta/gamma - 1)}`,
//!   which maps the slowly decaying tail onto a finite interval with a bounded
//!   integrand.

use serde::{Deserialize, Serialize};

use crate::boundaries::Boundary;
use crate::error::{Error, Result};
use crate::model::{ModelParams, State};
use crate::quadrature::{integrate, QuadSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ValueKind {
    Abs { p: f64 },
    Inv { p: f64 },
    C { c: f64 },
}

/// Value and first/second partials at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Partials {
    pub value: f64,
    pub v_x: f64,
    pub v_xx: f64,
    pub v_qi: f64,
    pub v_qmi: f64,
    /// The state lies strictly above the trigger (investment branch).
    pub investing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    X,
    Own,
    Opp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Central,
    Forward,
    Backward,
}

/// Relative step of the finite-difference partials.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueFn {
    pub kind: ValueKind,
    pub params: ModelParams,
    pub quadrature: QuadSettings,
    option_scale: f64,
    value_scale: f64,
}

/// The waiting branch `A x + B x^beta` frozen at one capital pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBranch {
    pub q_i: f64,
    pub q_mi: f64,
    /// `P(q_i + q_mi)` and `P'(q_i + q_mi)`.
    pub price: f64,
    pub slope: f64,
    pub b: f64,
    pub b_qi: f64,
    pub b_qmi: f64,
    /// Shock level separating the branches.
    pub trigger: f64,
    net_rate: f64,
    beta: f64,
}

impl LowerBranch {
    pub fn value(&self, x: f64) -> f64 {
        x * self.price * self.q_i / self.net_rate + self.b * x.powf(self.beta)
    }

    pub fn partials(&self, x: f64) -> Partials {
        let nr = self.net_rate;
        let beta = self.beta;
        let xb = x.powf(beta);
        Partials {
            value: self.value(x),
            v_x: self.price * self.q_i / nr + beta * self.b * xb / x,
            v_xx: beta * (beta - 1.0) * self.b * xb / (x * x),
            v_qi: x * (self.price + self.q_i * self.slope) / nr + self.b_qi * xb,
            v_qmi: x * self.q_i * self.slope / nr + self.b_qmi * xb,
            investing: false,
        }
    }

    /// `d V_x / d q_i` on this branch.
    fn v_x_qi(&self, x: f64) -> f64 {
        (self.price + self.q_i * self.slope) / self.net_rate
            + self.beta * self.b_qi * x.powf(self.beta - 1.0)
    }
}

impl ValueFn {
    pub fn new(params: ModelParams, kind: ValueKind) -> Result<Self> {
        match kind {
            ValueKind::Abs { p } | ValueKind::Inv { p } if !(p > 0.0 && p.is_finite()) => {
                return Err(Error::ParamDomain(format!(
                    "price threshold must be positive, got {p}"
                )))
            }
            ValueKind::C { c } if !(c >= 0.0 && c.is_finite()) => {
                return Err(Error::ParamDomain(format!(
                    "dynamic offset c must be nonnegative, got {c}"
                )))
            }
            _ => {}
        }
        Ok(Self {
            kind,
            params,
            quadrature: QuadSettings::default(),
            option_scale: 1.0,
            value_scale: 1.0,
        })
    }

    pub fn abs(params: ModelParams, p: f64) -> Result<Self> {
        Self::new(params, ValueKind::Abs { p })
    }

    pub fn inv(params: ModelParams, p: f64) -> Result<Self> {
        Self::new(params, ValueKind::Inv { p })
    }

    pub fn dynamic(params: ModelParams, c: f64) -> Result<Self> {
        Self::new(params, ValueKind::C { c })
    }

    /// Multiplies the option coefficient `B` (and its partials) by `scale`.
    /// Used to build deliberately wrong candidates.
    pub fn with_option_scale(mut self, scale: f64) -> Self {
        self.option_scale = scale;
        self
    }

    pub fn option_scale(&self) -> f64 {
        self.option_scale
    }

    /// Multiplies the whole value (and every partial) by `scale`.
    pub fn with_value_scale(mut self, scale: f64) -> Self {
        self.value_scale = scale;
        self
    }

    fn scaled(&self, d: Partials) -> Partials {
        if self.value_scale == 1.0 {
            return d;
        }
        let k = self.value_scale;
        Partials {
            value: k * d.value,
            v_x: k * d.v_x,
            v_xx: k * d.v_xx,
            v_qi: k * d.v_qi,
            v_qmi: k * d.v_qmi,
            ..d
        }
    }

    /// The trigger separating the waiting branch from the investment branch.
    /// For `Abs` this is the opponent's constant-price boundary.
    pub fn boundary(&self) -> Boundary {
        let kind = match self.kind {
            ValueKind::Abs { p } | ValueKind::Inv { p } => {
                crate::boundaries::BoundaryKind::ConstantPrice { p }
            }
            ValueKind::C { c } => crate::boundaries::BoundaryKind::DynamicC { c },
        };
        Boundary {
            kind,
            params: self.params,
        }
    }

    pub fn q_floor(&self) -> f64 {
        self.boundary().q_floor()
    }

    /// The waiting-branch coefficients at `(q_i, q_mi)`.
    pub fn lower_branch(&self, q_i: f64, q_mi: f64) -> Result<LowerBranch> {
        let m = &self.params;
        let trigger = self.boundary().trigger(q_i, q_mi)?;
        let total = q_i + q_mi;
        let price = m.inverse_demand(total)?;
        let slope = m.inverse_demand_slope(total)?;
        let nr = m.net_rate();
        let (beta, gamma) = (m.beta, m.gamma);
        let (b, b_qi, b_qmi) = match self.kind {
            ValueKind::Abs { p } => {
                // B x^beta = -(p / ((r-mu) beta)) (x P / p)^beta q_i
                let k = -p / (nr * beta);
                let y = price / p;
                let yb = y.powf(beta);
                let dy = beta * y.powf(beta - 1.0) * slope / p;
                (k * yb * q_i, k * (yb + q_i * dy), k * q_i * dy)
            }
            ValueKind::Inv { p } => {
                let k = gamma / (beta - gamma);
                let a1 = p * (gamma - 1.0) / (nr * gamma) - 1.0;
                let a2 = p * (beta - 1.0) / (nr * beta) - 1.0;
                let lin = a1 * q_i + a2 * q_mi;
                let y = price / p;
                let yb = y.powf(beta);
                let dy = beta * y.powf(beta - 1.0) * slope / p;
                (
                    k * lin * yb,
                    k * (a1 * yb + lin * dy),
                    k * (a2 * yb + lin * dy),
                )
            }
            ValueKind::C { c } => self.dynamic_coefficients(c, q_i, q_mi)?,
        };
        let s = self.option_scale;
        Ok(LowerBranch {
            q_i,
            q_mi,
            price,
            slope,
            b: s * b,
            b_qi: s * b_qi,
            b_qmi: s * b_qmi,
            trigger,
            net_rate: nr,
            beta,
        })
    }

    /// `(B, B_qi, B_qmi)` for the dynamic family.
    fn dynamic_coefficients(&self, c: f64, q_i: f64, q_mi: f64) -> Result<(f64, f64, f64)> {
        let m = &self.params;
        let (beta, gamma, p_star, nr) = (m.beta, m.gamma, m.p_star, m.net_rate());
        let kappa = beta / gamma - 1.0;
        let total = q_i + q_mi;

        // Integrand pieces in terms of t = 1 / (q + q_mi).
        let pieces = |t: f64| {
            let own_t = 1.0 - q_mi * t; // q t
            let above_diag = 2.0 * q_mi * t <= 1.0; // q >= q_mi
            let (markup, d_markup) = if c == 0.0 {
                (0.0, 0.0)
            } else if above_diag {
                (c * t / own_t, 0.0)
            } else {
                (c / q_mi, -c / (q_mi * q_mi))
            };
            let mk = p_star + markup;
            let ratio = (gamma - 1.0) / gamma * own_t + q_mi * t;
            let d_ratio = own_t * t / gamma;
            let bracket = 1.0 - mk * ratio / nr;
            let mkb = mk.powf(-beta);
            let h = bracket * mkb;
            let h_qmi = -(d_markup * ratio + mk * d_ratio) / nr * mkb
                - beta * bracket * mkb / mk * d_markup
                - beta / gamma * bracket * mkb * t;
            (h, h_qmi)
        };

        let w_top = total.powf(-kappa);
        let mut breaks = Vec::new();
        if c != 0.0 && q_i < q_mi {
            breaks.push((2.0 * q_mi).powf(-kappa));
        }
        let t_of = |w: f64| w.powf(1.0 / kappa);
        let int_b = integrate(|w| pieces(t_of(w)).0, 0.0, w_top, &breaks, &self.quadrature)?;
        let int_bq = integrate(|w| pieces(t_of(w)).1, 0.0, w_top, &breaks, &self.quadrature)?;
        let b = -int_b.value / kappa;
        let b_qmi = -int_bq.value / kappa;
        // dB/dq_i is the integrand at the lower limit.
        let b_qi = pieces(1.0 / total).0 * total.powf(-beta / gamma);
        Ok((b, b_qi, b_qmi))
    }

    pub fn value(&self, s: &State) -> Result<f64> {
        Ok(self.partials(s)?.value)
    }

    /// Value and partials. Derivatives are analytic on the waiting branch
    /// (for `C` the `q_mi` derivative of `B` is a second quadrature); on the
    /// investment branch they follow from the chain rule through `phi`.
    pub fn partials(&self, s: &State) -> Result<Partials> {
        self.unscaled_partials(s).map(|d| self.scaled(d))
    }

    fn unscaled_partials(&self, s: &State) -> Result<Partials> {
        if !(s.x > 0.0) {
            return Err(Error::ParamDomain(format!(
                "shock level must be positive, got {}",
                s.x
            )));
        }
        let lower = self.lower_branch(s.q_i, s.q_mi)?;
        if s.x <= lower.trigger {
            return Ok(lower.partials(s.x));
        }
        let m = &self.params;
        if let ValueKind::Abs { p } = self.kind {
            let level = p / m.p_star;
            return Ok(Partials {
                value: level * s.q_i,
                v_x: 0.0,
                v_xx: 0.0,
                v_qi: level,
                v_qmi: 0.0,
                investing: true,
            });
        }
        let boundary = self.boundary();
        let phi = boundary.base_capacity(s.x, s.q_mi)?;
        let at = self.lower_branch(phi, s.q_mi)?;
        let w = at.partials(s.x);
        let (t_own, t_opp) = boundary.trigger_gradient(phi, s.q_mi)?;
        let phi_x = 1.0 / t_own;
        let phi_qmi = -t_opp / t_own;
        let excess = w.v_qi - 1.0;
        Ok(Partials {
            value: w.value - phi + s.q_i,
            v_x: w.v_x + excess * phi_x,
            v_xx: w.v_xx + at.v_x_qi(s.x) * phi_x,
            v_qi: 1.0,
            v_qmi: w.v_qmi + excess * phi_qmi,
            investing: true,
        })
    }

    fn is_investing(&self, s: &State) -> Result<bool> {
        Ok(s.x > self.boundary().trigger(s.q_i, s.q_mi)?)
    }

    /// Finite-difference partial in one coordinate with one Richardson level.
    /// The step is `FD_STEP * max(|coord|, 1)` (`FD_STEP * x` for `x`). Fails
    /// with `TooCloseToBoundary` if the stencil leaves the branch of `s`.
    pub fn fd_derivative(&self, s: &State, coord: Coord, side: Side) -> Result<f64> {
        let (base, h) = match coord {
            Coord::X => (s.x, FD_STEP * s.x),
            Coord::Own => (s.q_i, FD_STEP * s.q_i.abs().max(1.0)),
            Coord::Opp => (s.q_mi, FD_STEP * s.q_mi.abs().max(1.0)),
        };
        let at = |d: f64| {
            let mut t = *s;
            match coord {
                Coord::X => t.x = base + d,
                Coord::Own => t.q_i = base + d,
                Coord::Opp => t.q_mi = base + d,
            }
            t
        };
        let branch = self.is_investing(s)?;
        let offsets: &[f64] = match side {
            Side::Central => &[-h, -0.5 * h, 0.5 * h, h],
            Side::Forward => &[0.0, 0.5 * h, h],
            Side::Backward => &[-h, -0.5 * h, 0.0],
        };
        let mut vals = Vec::with_capacity(offsets.len());
        for &d in offsets {
            let t = at(d);
            if self.is_investing(&t)? != branch {
                return Err(Error::TooCloseToBoundary { x: s.x });
            }
            vals.push(self.value(&t)?);
        }
        Ok(match side {
            Side::Central => {
                let wide = (vals[3] - vals[0]) / (2.0 * h);
                let narrow = (vals[2] - vals[1]) / h;
                (4.0 * narrow - wide) / 3.0
            }
            Side::Forward => {
                let wide = (vals[2] - vals[0]) / h;
                let narrow = (vals[1] - vals[0]) / (0.5 * h);
                2.0 * narrow - wide
            }
            Side::Backward => {
                let wide = (vals[2] - vals[0]) / h;
                let narrow = (vals[2] - vals[1]) / (0.5 * h);
                2.0 * narrow - wide
            }
        })
    }

    /// `k` such that `|V| <= k (q_i + q_mi)` whenever the state is at or below
    /// the opponent's trigger.
    pub fn linear_bound_coefficient(&self) -> f64 {
        let m = &self.params;
        let (beta, gamma, nr) = (m.beta, m.gamma, m.net_rate());
        match self.kind {
            ValueKind::Abs { p } => p / nr * (1.0 + 1.0 / beta),
            ValueKind::Inv { p } => {
                let a1 = p * (gamma - 1.0) / (nr * gamma) - 1.0;
                let a2 = p * (beta - 1.0) / (nr * beta) - 1.0;
                p / nr + gamma / (beta - gamma) * a1.abs().max(a2.abs())
            }
            ValueKind::C { .. } => {
                let cap = 2.0 * gamma / (2.0 * gamma - 1.0);
                m.p_star / nr * cap + beta / (beta - 1.0) * cap.powf(beta) * gamma / (beta - gamma)
            }
        }
    }

    /// Bound `|B| <= beta/(beta-1) (P/p*)^beta gamma/(beta-gamma) (q_i + q_mi)`
    /// on the dynamic family's option coefficient.
    pub fn option_coefficient_bound(&self, q_i: f64, q_mi: f64) -> Result<f64> {
        let m = &self.params;
        let total = q_i + q_mi;
        let price = m.inverse_demand(total)?;
        Ok(
            m.beta / (m.beta - 1.0) * (price / m.p_star).powf(m.beta) * m.gamma
                / (m.beta - m.gamma)
                * total,
        )
    }
}
