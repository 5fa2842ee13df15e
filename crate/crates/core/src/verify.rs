//! Pointwise checks of the verification conditions for a candidate
//! (value function, own strategy, opponent strategy) on a state grid.
//!
//! Triggers are read in firm `i`'s coordinates: the own trigger is
//! `own.trigger(q_i, q_mi)` and the opponent's is `opp.trigger(q_mi, q_i)`.
//!
//! | key | condition | region |
//! |-----|-----------|--------|
//! | `1_pde` | `-rV + pi + mu x V_x + sigma^2 x^2 V_xx / 2 = 0` | below both triggers |
//! | `2_own_marginal_one` | `V_qi = 1` | at or above own trigger |
//! | `3_opponent_marginal_zero` | `V_qmi = 0` | between triggers when own > opponent |
//! | `4_pde_inequality` | same expression `<= 0` | below opponent trigger |
//! | `5_own_marginal_le_one` | `V_qi <= 1` | below both triggers |
//! | `6_opponent_marginal_le_zero` | `V_qmi <= 0` | at own trigger `<=` opponent trigger |

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::boundaries::{Boundary, BoundaryKind};
use crate::error::{Error, Result};
use crate::model::State;
use crate::outcomes::{Firm, Outcome};
use crate::values::{Coord, Partials, Side, ValueFn, ValueKind};

pub const PDE: &str = "1_pde";
pub const OWN_UNIT: &str = "2_own_marginal_one";
pub const OPP_ZERO: &str = "3_opponent_marginal_zero";
pub const PDE_INEQ: &str = "4_pde_inequality";
pub const OWN_LE_ONE: &str = "5_own_marginal_le_one";
pub const OPP_LE_ZERO: &str = "6_opponent_marginal_le_zero";
pub const PROPAGATION: &str = "derivative_propagation";
pub const FD_CHECK: &str = "fd_crosscheck";
pub const OPP_INVESTMENT: &str = "opponent_investment";
pub const TRANSVERSALITY: &str = "transversality";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub analytic: f64,
    pub quadrature: f64,
    pub fd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            analytic: 1e-9,
            quadrature: 1e-7,
            fd: 1e-6,
        }
    }
}

impl Tolerances {
    /// Tolerance for conditions evaluated from the candidate's own partials.
    pub fn for_kind(&self, kind: &ValueKind) -> f64 {
        match kind {
            ValueKind::C { .. } => self.quadrature,
            _ => self.analytic,
        }
    }
}

/// State grid. Shock levels are `frac * X(q_i, q_mi)` with `X` the
/// candidate's branch trigger, log-spaced over `[x_lo, 1]` (the last point
/// sits on the boundary) plus `n_upper` points over `(1, x_upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub n_x: usize,
    pub n_upper: usize,
    pub n_q: usize,
    pub x_lo: f64,
    pub x_upper: f64,
    /// Capitals run linearly over `[q_lo, q_hi]`; `None` means
    /// `q_lo = floor` (or `0.25` when the floor is zero) and `q_hi = 10 floor + 5`.
    pub q_lo: Option<f64>,
    pub q_hi: Option<f64>,
    /// FD cross-checks use every `fd_stride`-th point in each direction.
    pub fd_stride: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_x: 40,
            n_upper: 10,
            n_q: 20,
            x_lo: 0.05,
            x_upper: 2.0,
            q_lo: None,
            q_hi: None,
            fd_stride: 4,
        }
    }
}

/// Lower end of the capital grid when the admissible floor is zero.
pub const ZERO_FLOOR_Q_LO: f64 = 0.25;

impl GridSpec {
    pub fn capitals(&self, floor: f64) -> Vec<f64> {
        let lo = self
            .q_lo
            .unwrap_or(if floor > 0.0 { floor } else { ZERO_FLOOR_Q_LO });
        let hi = self.q_hi.unwrap_or(10.0 * floor + 5.0);
        linspace(lo, hi, self.n_q)
    }

    /// Fractions of the trigger; the boundary point `1.0` is included exactly.
    pub fn fractions(&self) -> Vec<f64> {
        let mut out = logspace(self.x_lo, 1.0, self.n_x);
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        if self.n_upper > 0 {
            let upper = logspace(1.0, self.x_upper, self.n_upper + 1);
            out.extend_from_slice(&upper[1..]);
        }
        out
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    linspace(a, b, n).into_iter().map(f64::exp).collect()
}

/// Worst residual of one condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionResult {
    pub worst: f64,
    /// `[x, q_i, q_mi]` of the worst point.
    pub at: Option<[f64; 3]>,
    pub pass: bool,
    pub tol: f64,
    /// Grid points in the condition's region. Zero means the condition is void.
    pub points: usize,
}

impl ConditionResult {
    fn empty(tol: f64) -> Self {
        Self {
            worst: 0.0,
            at: None,
            pass: true,
            tol,
            points: 0,
        }
    }

    fn record(&mut self, residual: f64, s: &State) {
        self.points += 1;
        if residual > self.worst || residual.is_nan() {
            self.worst = residual;
            self.at = Some([s.x, s.q_i, s.q_mi]);
        }
        self.pass = self.worst <= self.tol;
    }

    fn merge(&mut self, other: &ConditionResult) {
        self.points += other.points;
        if other.worst > self.worst || other.worst.is_nan() {
            self.worst = other.worst;
            self.at = other.at;
        }
        self.pass = self.worst <= self.tol;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub value: ValueKind,
    pub own: BoundaryKind,
    pub opponent: BoundaryKind,
    pub grid: GridSpec,
    pub conditions: BTreeMap<&'static str, ConditionResult>,
}

impl VerificationReport {
    pub fn passes(&self) -> bool {
        self.conditions.values().all(|c| c.pass)
    }

    pub fn condition(&self, key: &str) -> Option<&ConditionResult> {
        self.conditions.get(key)
    }

    pub fn failing(&self) -> Vec<&'static str> {
        self.conditions
            .iter()
            .filter(|(_, c)| !c.pass)
            .map(|(k, _)| *k)
            .collect()
    }

    pub fn insert(&mut self, key: &'static str, result: ConditionResult) {
        self.conditions.insert(key, result);
    }
}

/// A candidate equilibrium seen from firm `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub value: ValueFn,
    pub own: Boundary,
    pub opponent: Boundary,
}

impl Candidate {
    pub fn new(value: ValueFn, own: Boundary, opponent: Boundary) -> Self {
        Self {
            value,
            own,
            opponent,
        }
    }

    fn own_trigger(&self, s: &State) -> Result<f64> {
        self.own.trigger(s.q_i, s.q_mi)
    }

    fn opp_trigger(&self, s: &State) -> Result<f64> {
        self.opponent.trigger(s.q_mi, s.q_i)
    }

    fn floor(&self) -> f64 {
        self.value
            .q_floor()
            .max(self.own.q_floor())
            .max(self.opponent.q_floor())
    }

    /// The HJB expression `-rV + pi + mu x V_x + sigma^2 x^2 V_xx / 2`.
    pub fn generator(&self, s: &State, d: &Partials) -> Result<f64> {
        let m = &self.value.params;
        let pi = m.profit_flow(s)?;
        Ok(-m.r * d.value + pi + m.mu * s.x * d.v_x + 0.5 * m.sigma * m.sigma * s.x * s.x * d.v_xx)
    }
}

#[derive(Debug, Clone, Default)]
struct PointResults {
    entries: Vec<(&'static str, f64)>,
}

/// The six conditions plus derivative propagation and FD cross-checks over
/// the grid. Points are evaluated in parallel and reduced in grid order.
pub fn verify(
    candidate: &Candidate,
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<VerificationReport> {
    let caps = grid.capitals(candidate.floor());
    let fracs = grid.fractions();
    let mut points = Vec::with_capacity(caps.len() * caps.len() * fracs.len());
    for (a, &qi) in caps.iter().enumerate() {
        for (b, &qmi) in caps.iter().enumerate() {
            for (k, &f) in fracs.iter().enumerate() {
                let fd = a % grid.fd_stride.max(1) == 0
                    && b % grid.fd_stride.max(1) == 0
                    && k % grid.fd_stride.max(1) == 0;
                points.push((qi, qmi, f, fd));
            }
        }
    }
    let per_point: Vec<Result<(State, PointResults)>> = points
        .par_iter()
        .map(|&(qi, qmi, frac, fd)| {
            let t = candidate.value.boundary().trigger(qi, qmi)?;
            let s = State::new(frac * t, qi, qmi);
            let at_boundary = frac == 1.0;
            let res = evaluate_point(candidate, &s, at_boundary, fd, tol)?;
            Ok((s, res))
        })
        .collect();

    let base = tol.for_kind(&candidate.value.kind);
    let mut conditions: BTreeMap<&'static str, ConditionResult> = BTreeMap::new();
    for key in [PDE, OWN_UNIT, OPP_ZERO, PDE_INEQ, OWN_LE_ONE, OPP_LE_ZERO] {
        conditions.insert(key, ConditionResult::empty(base));
    }
    conditions.insert(PROPAGATION, ConditionResult::empty(tol.fd));
    conditions.insert(FD_CHECK, ConditionResult::empty(tol.fd));
    for r in per_point {
        let (s, res) = r?;
        for (key, residual) in res.entries {
            conditions
                .get_mut(key)
                .expect("known condition")
                .record(residual, &s);
        }
    }
    Ok(VerificationReport {
        value: candidate.value.kind,
        own: candidate.own.kind,
        opponent: candidate.opponent.kind,
        grid: *grid,
        conditions,
    })
}

fn evaluate_point(
    c: &Candidate,
    s: &State,
    at_boundary: bool,
    fd: bool,
    tol: &Tolerances,
) -> Result<PointResults> {
    let mut out = PointResults::default();
    let d = c.value.partials(s)?;
    let own = c.own_trigger(s)?;
    let opp = c.opp_trigger(s)?;
    let m = &c.value.params;

    if s.x <= opp {
        let g = c.generator(s, &d)?;
        let scale = m.r * d.value.abs() + 1.0;
        out.entries.push((PDE_INEQ, g.max(0.0) / scale));
        if s.x <= own {
            out.entries.push((PDE, g.abs() / scale));
            out.entries.push((OWN_LE_ONE, (d.v_qi - 1.0).max(0.0)));
        }
    }
    if s.x >= own {
        out.entries.push((OWN_UNIT, (d.v_qi - 1.0).abs()));
    }
    if own > opp && s.x >= opp && s.x <= own {
        out.entries.push((OPP_ZERO, d.v_qmi.abs()));
    }
    if at_boundary && own.is_finite() && s.x == own && own <= opp {
        out.entries.push((OPP_LE_ZERO, d.v_qmi.max(0.0)));
    }

    if own.is_finite() && s.x > own * (1.0 + 1e-6) {
        if let Some(dev) = propagation_deviation(c, s, tol)? {
            out.entries.push((PROPAGATION, dev));
        }
    }
    if fd {
        for dev in fd_deviations(c, s, &d)? {
            out.entries.push((FD_CHECK, dev));
        }
    }
    Ok(out)
}

/// `|V_qmi(x, q_i, q_mi) - V_qmi(x, phi, q_mi)|` with the left side by finite
/// differences on the investment branch and the right side from the analytic
/// partials on the boundary. `None` when `phi` sits within the FD stencil of
/// the diagonal, where the dynamic trigger kinks.
fn propagation_deviation(c: &Candidate, s: &State, _tol: &Tolerances) -> Result<Option<f64>> {
    let phi = c.own.base_capacity(s.x, s.q_mi)?;
    if matches!(c.own.kind, BoundaryKind::DynamicC { c } if c > 0.0)
        && (phi - s.q_mi).abs() < 1e-3 * s.q_mi.max(1.0)
    {
        return Ok(None);
    }
    let Some(lhs) = fd_inside_domain(&c.value, s, Coord::Opp)? else {
        return Ok(None);
    };
    let rhs = c.value.partials(&State::new(s.x, phi, s.q_mi))?.v_qmi;
    Ok(Some((lhs - rhs).abs() / rhs.abs().max(1.0)))
}

/// Relative gaps between analytic and finite-difference partials. Stencils
/// that straddle the boundary or the diagonal kink are skipped.
fn fd_deviations(c: &Candidate, s: &State, d: &Partials) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let kinked = matches!(c.value.kind, ValueKind::C { c } if c > 0.0);
    for (coord, exact) in [
        (Coord::X, d.v_x),
        (Coord::Own, d.v_qi),
        (Coord::Opp, d.v_qmi),
    ] {
        if kinked && coord != Coord::X && (s.q_i - s.q_mi).abs() < 1e-3 * s.q_i.max(1.0) {
            continue;
        }
        if let Some(fd) = fd_inside_domain(&c.value, s, coord)? {
            out.push((fd - exact).abs() / exact.abs().max(1.0))
        }
    }
    Ok(out)
}

/// Central difference, or a forward one at the capital floor. `None` when
/// the stencil crosses the branch boundary.
fn fd_inside_domain(v: &ValueFn, s: &State, coord: Coord) -> Result<Option<f64>> {
    for side in [Side::Central, Side::Forward] {
        match v.fd_derivative(s, coord, side) {
            Ok(d) => return Ok(Some(d)),
            Err(Error::TooCloseToBoundary { .. }) => return Ok(None),
            Err(Error::DomainBelowFloor { .. }) if side == Side::Central => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

/// Side conditions along an outcome: wherever the opponent's capital grows,
/// firm `firm`'s candidate must have `V_qmi = 0` at the post-investment state.
/// Increments below `jump_tol` are ignored.
pub fn check_opponent_investment(
    value: &ValueFn,
    outcome: &Outcome<'_>,
    firm: Firm,
    jump_tol: f64,
    tol: f64,
) -> Result<ConditionResult> {
    let own = outcome.capital(firm);
    let opp = outcome.capital(firm.other());
    let xs = &outcome.path.values;
    let mut res = ConditionResult::empty(tol);
    let mut prev = outcome.initial(firm.other());
    for k in 0..xs.len() {
        if opp[k] - prev > jump_tol {
            let s = State::new(xs[k], own[k], opp[k]);
            let d = value.partials(&s)?;
            res.record(d.v_qmi.abs(), &s);
        }
        prev = opp[k];
    }
    Ok(res)
}

/// Merges per-outcome results, e.g. across simulated paths.
pub fn merge_results(parts: &[ConditionResult]) -> Option<ConditionResult> {
    let mut it = parts.iter();
    let mut acc = *it.next()?;
    for p in it {
        acc.merge(p);
    }
    Some(acc)
}

/// Transversality probe from terminal states sampled at horizons `T` and `2T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransversalityReport {
    pub horizon: f64,
    /// `e^{-rT} mean |V(X_T, Q_T)|` at `T` and `2T`.
    pub at_t: f64,
    pub at_2t: f64,
    /// `e^{-rT} k mean(Q1_T + Q2_T)` at `T` and `2T`.
    pub bound_at_t: f64,
    pub bound_at_2t: f64,
    pub cap: f64,
    pub pass: bool,
}

/// Passes when the discounted value at `2T` is below half the value at `T`
/// and below `cap`, and the linear bound decays the same way.
pub fn check_transversality(
    value: &ValueFn,
    horizon: f64,
    at_t: &[State],
    at_2t: &[State],
    cap: f64,
) -> Result<TransversalityReport> {
    let r = value.params.r;
    let k = value.linear_bound_coefficient();
    let stats = |states: &[State], t: f64| -> Result<(f64, f64)> {
        let n = states.len().max(1) as f64;
        let mut v = 0.0;
        let mut q = 0.0;
        for s in states {
            v += value.value(s)?.abs();
            q += s.q_i + s.q_mi;
        }
        let disc = (-r * t).exp();
        Ok((disc * v / n, disc * k * q / n))
    };
    let (v1, b1) = stats(at_t, horizon)?;
    let (v2, b2) = stats(at_2t, 2.0 * horizon)?;
    let pass = v2 <= 0.5 * v1 && v2 <= cap && b2 <= 0.5 * b1;
    Ok(TransversalityReport {
        horizon,
        at_t: v1,
        at_2t: v2,
        bound_at_t: b1,
        bound_at_2t: b2,
        cap,
        pass,
    })
}

impl From<&TransversalityReport> for ConditionResult {
    fn from(t: &TransversalityReport) -> Self {
        ConditionResult {
            worst: t.at_2t,
            at: None,
            pass: t.pass,
            tol: t.cap,
            points: 2,
        }
    }
}
