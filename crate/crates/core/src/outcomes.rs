//! Capital-path pairs generated by reflection strategies along a shock path.
//!
//! Grid semantics: `Q[k]` is the capital held right after any investment at
//! `t_k`. An initial jump at `k = 0` is allowed; later increments come from
//! running-supremum updates and shrink with the grid.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::boundaries::{Boundary, BoundaryKind};
use crate::error::{Error, Result};
use crate::paths::{RunningSup, ShockPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Firm {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Firm {
    pub fn other(self) -> Self {
        match self {
            Firm::One => Firm::Two,
            Firm::Two => Firm::One,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Firm::One),
            2 => Some(Firm::Two),
            _ => None,
        }
    }
}

/// One reflection strategy per firm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyPair {
    pub first: Boundary,
    pub second: Boundary,
}

impl StrategyPair {
    pub fn new(first: Boundary, second: Boundary) -> Self {
        Self { first, second }
    }

    pub fn symmetric(b: Boundary) -> Self {
        Self {
            first: b,
            second: b,
        }
    }

    pub fn of(&self, firm: Firm) -> &Boundary {
        match firm {
            Firm::One => &self.first,
            Firm::Two => &self.second,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Construction {
    /// The named firm never invests; the other reflects alone.
    AbstainI(Firm),
    /// Smaller firm catches up, then both track `sup psi(X)`.
    SymmetricCatchUp,
    /// Aggregate reflection capital split by fixed weights.
    AggregateSplit([f64; 2]),
    /// Per-step sequential updates, the first-named firm moving first.
    FixedPointIterate(Firm),
    /// Nobody invests.
    Frozen,
}

/// An admissible pair of nondecreasing capital paths aligned to a shock path.
#[derive(Debug, Clone)]
pub struct Outcome<'p> {
    pub path: &'p ShockPath,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub q1_0: f64,
    pub q2_0: f64,
    pub construction: Construction,
}

impl<'p> Outcome<'p> {
    pub fn capital(&self, firm: Firm) -> &[f64] {
        match firm {
            Firm::One => &self.q1,
            Firm::Two => &self.q2,
        }
    }

    pub fn capital_mut(&mut self, firm: Firm) -> &mut Vec<f64> {
        match firm {
            Firm::One => &mut self.q1,
            Firm::Two => &mut self.q2,
        }
    }

    pub fn initial(&self, firm: Firm) -> f64 {
        match firm {
            Firm::One => self.q1_0,
            Firm::Two => self.q2_0,
        }
    }

    pub fn aggregate(&self, k: usize) -> f64 {
        self.q1[k] + self.q2[k]
    }

    /// No investment by either firm.
    pub fn frozen(path: &'p ShockPath, q1_0: f64, q2_0: f64) -> Result<Self> {
        check_initial(q1_0, q2_0)?;
        let n = path.values.len();
        Ok(Self {
            path,
            q1: vec![q1_0; n],
            q2: vec![q2_0; n],
            q1_0,
            q2_0,
            construction: Construction::Frozen,
        })
    }

    /// `t,x,q1,q2` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,q1,q2")?;
        for k in 0..self.path.values.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.path.time(k),
                self.path.values[k],
                self.q1[k],
                self.q2[k]
            )?;
        }
        Ok(())
    }
}

fn check_initial(q1_0: f64, q2_0: f64) -> Result<()> {
    if !(q1_0 >= 0.0 && q2_0 >= 0.0) || !q1_0.is_finite() || !q2_0.is_finite() {
        return Err(Error::ParamDomain(format!(
            "initial capitals must be nonnegative, got ({q1_0}, {q2_0})"
        )));
    }
    Ok(())
}

fn pick(firm: Firm, a: f64, b: f64) -> (f64, f64) {
    match firm {
        Firm::One => (a, b),
        Firm::Two => (b, a),
    }
}

/// Whether `b` has a trigger at least `p / P` everywhere.
fn dominates_constant(b: &Boundary, p: f64) -> bool {
    match b.kind {
        BoundaryKind::Infinite => true,
        BoundaryKind::ConstantPrice { p: own } => own >= p,
        BoundaryKind::DynamicC { .. } => b.params.p_star >= p,
    }
}

/// The unique outcome in which `abstainer` never invests and the other firm
/// reflects at its constant price threshold:
/// `Q^inv_t = q^inv ∨ sup_{s<=t} phi^inv(X_s, q^abs)`.
///
/// The investor must use a constant price threshold `p` (or the dynamic family
/// with `c = 0`); the abstainer's trigger must dominate `p / P` so that the
/// outcome is consistent with its strategy too.
pub fn build_abstain_outcome<'p>(
    pair: &StrategyPair,
    path: &'p ShockPath,
    q1_0: f64,
    q2_0: f64,
    abstainer: Firm,
) -> Result<Outcome<'p>> {
    check_initial(q1_0, q2_0)?;
    let investor = abstainer.other();
    let inv_b = pair.of(investor);
    let p = inv_b.constant_threshold().ok_or_else(|| {
        Error::KindMismatch(format!(
            "investing firm needs a constant price threshold, got {:?}",
            inv_b.kind
        ))
    })?;
    let abs_b = pair.of(abstainer);
    if !dominates_constant(abs_b, p) {
        return Err(Error::KindMismatch(format!(
            "abstaining firm's boundary {:?} does not dominate the threshold {p}",
            abs_b.kind
        )));
    }
    let (q_inv0, q_abs0) = pick(investor, q1_0, q2_0);
    let g = inv_b.params.gamma;
    // x -> (x/p)^g is increasing, so the power is only needed at new highs.
    let mut sup = RunningSup::new(q_inv0);
    let mut x_high = f64::NEG_INFINITY;
    let invested: Vec<f64> = path
        .values
        .iter()
        .map(|&x| {
            if x > x_high {
                x_high = x;
                sup.update((x / p).powf(g) - q_abs0);
            }
            sup.value()
        })
        .collect();
    let frozen = vec![q_abs0; invested.len()];
    let (q1, q2) = match investor {
        Firm::One => (invested, frozen),
        Firm::Two => (frozen, invested),
    };
    Ok(Outcome {
        path,
        q1,
        q2,
        q1_0,
        q2_0,
        construction: Construction::AbstainI(abstainer),
    })
}

/// The catch-up outcome of the dynamic family:
/// `Q^i_t = q^i ∨ sup_{s<=t} min(phi^i(X_s, q^-i), psi(X_s))`.
pub fn build_symmetric_outcome<'p>(
    pair: &StrategyPair,
    path: &'p ShockPath,
    q1_0: f64,
    q2_0: f64,
) -> Result<Outcome<'p>> {
    check_initial(q1_0, q2_0)?;
    let b = pair.first;
    match (b.kind, pair.second.kind) {
        (BoundaryKind::DynamicC { c: c1 }, BoundaryKind::DynamicC { c: c2 }) if c1 == c2 => {}
        (k1, k2) => {
            return Err(Error::KindMismatch(format!(
                "symmetric outcome needs matching dynamic_c boundaries, got {k1:?} and {k2:?}"
            )))
        }
    }
    let floor = b.q_floor();
    for q in [q1_0, q2_0] {
        if q < floor {
            return Err(Error::DomainBelowFloor { q, floor });
        }
    }
    let n = path.values.len();
    let mut q1 = Vec::with_capacity(n);
    let mut q2 = Vec::with_capacity(n);
    let (mut cur1, mut cur2) = (q1_0, q2_0);
    for &x in &path.values {
        // psi is shared by both firms; evaluate lazily.
        let mut psi = None;
        cur1 = catch_up_step(&b, x, cur1, q2_0, &mut psi)?;
        cur2 = catch_up_step(&b, x, cur2, q1_0, &mut psi)?;
        q1.push(cur1);
        q2.push(cur2);
    }
    Ok(Outcome {
        path,
        q1,
        q2,
        q1_0,
        q2_0,
        construction: Construction::SymmetricCatchUp,
    })
}

fn catch_up_step(
    b: &Boundary,
    x: f64,
    current: f64,
    opp_initial: f64,
    psi: &mut Option<f64>,
) -> Result<f64> {
    // phi(x, q^-i) <= current iff x <= X(current, q^-i): nothing can change.
    if x <= b.trigger(current, opp_initial)? {
        return Ok(current);
    }
    let phi = b.base_capacity(x, opp_initial)?;
    let s = match *psi {
        Some(s) => s,
        None => {
            let s = b.psi(x)?;
            *psi = Some(s);
            s
        }
    };
    Ok(current.max(phi.min(s)))
}

/// Splits the aggregate reflection capital of a common constant threshold
/// by fixed nonnegative weights summing to one.
pub fn build_aggregate_split<'p>(
    pair: &StrategyPair,
    path: &'p ShockPath,
    q1_0: f64,
    q2_0: f64,
    weights: [f64; 2],
) -> Result<Outcome<'p>> {
    check_initial(q1_0, q2_0)?;
    let p = match (
        pair.first.constant_threshold(),
        pair.second.constant_threshold(),
    ) {
        (Some(a), Some(b)) if a == b => a,
        _ => {
            return Err(Error::KindMismatch(format!(
                "aggregate split needs a common constant price threshold, got {:?} and {:?}",
                pair.first.kind, pair.second.kind
            )))
        }
    };
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidSplit(format!(
            "weights must be nonnegative, got {weights:?}"
        )));
    }
    if (weights[0] + weights[1] - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidSplit(format!(
            "weights must sum to one, got {weights:?}"
        )));
    }
    let g = pair.first.params.gamma;
    let base = q1_0 + q2_0;
    let mut sup = RunningSup::new(base);
    let n = path.values.len();
    let mut q1 = Vec::with_capacity(n);
    let mut q2 = Vec::with_capacity(n);
    let mut x_high = f64::NEG_INFINITY;
    for &x in &path.values {
        if x > x_high {
            x_high = x;
            sup.update((x / p).powf(g));
        }
        let added = sup.value() - base;
        q1.push(q1_0 + weights[0] * added);
        q2.push(q2_0 + weights[1] * added);
    }
    Ok(Outcome {
        path,
        q1,
        q2,
        q1_0,
        q2_0,
        construction: Construction::AggregateSplit(weights),
    })
}

/// Joint outcome of an arbitrary strategy pair by sequential per-step
/// updates: `mover` reflects against the opponent's previous capital, then
/// the opponent reflects against the mover's new capital.
pub fn build_sequential_outcome<'p>(
    pair: &StrategyPair,
    path: &'p ShockPath,
    q1_0: f64,
    q2_0: f64,
    mover: Firm,
) -> Result<Outcome<'p>> {
    check_initial(q1_0, q2_0)?;
    let (b_mov, b_opp) = (pair.of(mover), pair.of(mover.other()));
    let (mut cur_m, mut cur_o) = pick(mover, q1_0, q2_0);
    let n = path.values.len();
    let mut qm = Vec::with_capacity(n);
    let mut qo = Vec::with_capacity(n);
    for &x in &path.values {
        cur_m = reflect(b_mov, x, cur_m, cur_o)?;
        cur_o = reflect(b_opp, x, cur_o, cur_m)?;
        qm.push(cur_m);
        qo.push(cur_o);
    }
    let (q1, q2) = match mover {
        Firm::One => (qm, qo),
        Firm::Two => (qo, qm),
    };
    Ok(Outcome {
        path,
        q1,
        q2,
        q1_0,
        q2_0,
        construction: Construction::FixedPointIterate(mover),
    })
}

fn reflect(b: &Boundary, x: f64, own: f64, opp: f64) -> Result<f64> {
    if matches!(b.kind, BoundaryKind::Infinite) || x <= b.trigger(own, opp)? {
        return Ok(own);
    }
    Ok(own.max(b.base_capacity(x, opp)?))
}

/// Result of re-deriving one firm's capital from its strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    /// `max_k |Q[k] - (q_0 ∨ sup_{s<=k} phi(X_s, Q^-i_s))|`.
    pub max_abs_deviation: f64,
    /// Same, scaled by `1 + Q[k]`.
    pub max_rel_deviation: f64,
    pub worst_index: usize,
    /// Grid indices where the scaled deviation exceeds the tolerance.
    pub violations: Vec<usize>,
    /// Largest `X[k] - X(Q^i[k], Q^-i[k])` relative to the band.
    pub max_containment_excess: f64,
    pub containment_violations: Vec<usize>,
    /// Investment mass placed away from the boundary band (after `t = 0`).
    pub off_boundary_investment: f64,
    pub support_violations: Vec<usize>,
    pub tolerance: f64,
}

impl ConsistencyReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
            && self.containment_violations.is_empty()
            && self.support_violations.is_empty()
    }
}

/// Default relative tolerance for [`check_consistency`].
pub const CONSISTENCY_TOL: f64 = 1e-9;

/// One-step overshoot band `3 sigma x sqrt(dt)` around a trigger.
pub fn boundary_band(sigma: f64, x: f64, dt: f64) -> f64 {
    3.0 * sigma.abs() * x * dt.sqrt()
}

/// Recomputes `q_0 ∨ sup phi(X_s, Q^-i_s)` from the stored opponent path and
/// compares it with the stored capital of `firm`. Also checks that the state
/// stays below the trigger (up to the grid band) and that investment only
/// happens near the trigger.
pub fn check_consistency(
    outcome: &Outcome<'_>,
    strategy: &Boundary,
    firm: Firm,
    tol: f64,
) -> Result<ConsistencyReport> {
    let own = outcome.capital(firm);
    let opp = outcome.capital(firm.other());
    let q0 = outcome.initial(firm);
    let path = outcome.path;
    let sigma = strategy.params.sigma;
    let mut sup = RunningSup::new(q0);
    let mut report = ConsistencyReport {
        max_abs_deviation: 0.0,
        max_rel_deviation: 0.0,
        worst_index: 0,
        violations: Vec::new(),
        max_containment_excess: f64::NEG_INFINITY,
        containment_violations: Vec::new(),
        off_boundary_investment: 0.0,
        support_violations: Vec::new(),
        tolerance: tol,
    };
    for (k, &x) in path.values.iter().enumerate() {
        let expected = sup.update(strategy.base_capacity(x, opp[k])?);
        let dev = (own[k] - expected).abs();
        let rel = dev / (1.0 + own[k].abs());
        if dev > report.max_abs_deviation {
            report.max_abs_deviation = dev;
        }
        if rel > report.max_rel_deviation {
            report.max_rel_deviation = rel;
            report.worst_index = k;
        }
        if !(rel <= tol) {
            report.violations.push(k);
        }

        let trigger = strategy.trigger(own[k], opp[k])?;
        let band = boundary_band(sigma, x, path.dt);
        if trigger.is_finite() {
            let excess = (x - trigger) / band;
            report.max_containment_excess = report.max_containment_excess.max(excess);
            if excess > 1.0 {
                report.containment_violations.push(k);
            }
        }
        if k > 0 {
            let jump = own[k] - own[k - 1];
            if jump > tol * (1.0 + own[k].abs()) && !((x - trigger).abs() < band) {
                report.off_boundary_investment += jump;
                report.support_violations.push(k);
            }
        }
    }
    Ok(report)
}

/// Structure of a catch-up outcome relative to `tau`, the first grid point
/// with `psi(X) >= max(q1_0, q2_0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatchUpReport {
    pub tau: Option<usize>,
    /// The larger firm held its initial capital strictly before `tau`.
    pub leader_idle_before_tau: bool,
    /// `max_{k >= tau} |Q1 - Q2| / (1 + Q1)`.
    pub max_gap_after_tau: f64,
    /// `min(Q1, Q2)` never decreased.
    pub min_nondecreasing: bool,
}

impl CatchUpReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.leader_idle_before_tau && self.min_nondecreasing && self.max_gap_after_tau <= tol
    }
}

pub fn catch_up_report(outcome: &Outcome<'_>, boundary: &Boundary) -> Result<CatchUpReport> {
    let leader = if outcome.q1_0 >= outcome.q2_0 {
        Firm::One
    } else {
        Firm::Two
    };
    let lead_q = outcome.initial(leader);
    let mut tau = None;
    for (k, &x) in outcome.path.values.iter().enumerate() {
        if boundary.psi(x)? >= lead_q {
            tau = Some(k);
            break;
        }
    }
    let end = tau.unwrap_or(outcome.path.values.len());
    let leader_idle_before_tau = outcome.capital(leader)[..end].iter().all(|&q| q == lead_q);
    let max_gap_after_tau = (end..outcome.path.values.len())
        .map(|k| (outcome.q1[k] - outcome.q2[k]).abs() / (1.0 + outcome.q1[k]))
        .fold(0.0, f64::max);
    let mins: Vec<f64> = outcome
        .q1
        .iter()
        .zip(&outcome.q2)
        .map(|(a, b)| a.min(*b))
        .collect();
    let min_nondecreasing = mins.windows(2).all(|w| w[1] >= w[0]);
    Ok(CatchUpReport {
        tau,
        leader_idle_before_tau,
        max_gap_after_tau,
        min_nondecreasing,
    })
}

/// Discount factors on the grid: `e^{-r (t_k + dt/2)}` per step plus `e^{-rT}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountGrid {
    pub dt: f64,
    pub r: f64,
    pub mid: Vec<f64>,
    pub terminal: f64,
}

impl DiscountGrid {
    pub fn new(r: f64, dt: f64, steps: usize) -> Self {
        let mid = (0..steps)
            .map(|k| (-r * (k as f64 + 0.5) * dt).exp())
            .collect();
        Self {
            dt,
            r,
            mid,
            terminal: (-r * steps as f64 * dt).exp(),
        }
    }
}

/// `(Q_0 - q_0) + sum_k e^{-r(t_k + dt/2)} (Q_{k+1} - Q_k)`: the initial jump
/// at full weight, later increments discounted at step midpoints.
pub fn discounted_investment_cost(capital: &[f64], initial: f64, disc: &DiscountGrid) -> f64 {
    let mut cost = capital[0] - initial;
    for (k, w) in capital.windows(2).enumerate() {
        cost += disc.mid[k] * (w[1] - w[0]);
    }
    cost
}

/// Defect of the integration-by-parts identity
/// `Q_0 + int_(0,T] e^{-rt} dQ = r int_0^T e^{-rt} Q dt + e^{-rT} Q_T`
/// with midpoint discounting on both sides.
pub fn discount_identity_defect(capital: &[f64], disc: &DiscountGrid) -> f64 {
    let mut lhs = capital[0];
    let mut integral = 0.0;
    for (k, w) in capital.windows(2).enumerate() {
        lhs += disc.mid[k] * (w[1] - w[0]);
        integral += disc.mid[k] * 0.5 * (w[0] + w[1]);
    }
    let rhs = disc.r * integral * disc.dt + disc.terminal * capital[capital.len() - 1];
    lhs - rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derive_params, ModelParams};
    use crate::paths::generate_path;

    fn golden() -> ModelParams {
        derive_params(1.0, 0.0, 2f64.sqrt(), 1.5).unwrap()
    }

    fn flat_path(x: f64, n: usize) -> ShockPath {
        ShockPath {
            x0: x,
            dt: 0.01,
            horizon: n as f64 * 0.01,
            values: vec![x; n + 1],
            seed: 0,
            path_index: 0,
        }
    }

    #[test]
    fn quiet_path_leaves_capital_unchanged() {
        let m = golden();
        let pair = StrategyPair::symmetric(Boundary::constant_price(m, m.p_star).unwrap());
        let path = flat_path(0.5, 50);
        let o = build_abstain_outcome(&pair, &path, 1.0, 2.0, Firm::Two).unwrap();
        assert!(o.q1.iter().all(|&q| q == 1.0));
        assert!(o.q2.iter().all(|&q| q == 2.0));

        let dynamic = StrategyPair::symmetric(Boundary::dynamic_c(m, 1.0).unwrap());
        let s = build_symmetric_outcome(&dynamic, &path, 1.0, 1.0).unwrap();
        assert!(s.q1.iter().chain(&s.q2).all(|&q| q == 1.0));
    }

    #[test]
    fn abstain_requires_constant_investor() {
        let m = golden();
        let pair = StrategyPair::symmetric(Boundary::dynamic_c(m, 1.0).unwrap());
        let path = flat_path(0.5, 5);
        assert!(matches!(
            build_abstain_outcome(&pair, &path, 1.0, 1.0, Firm::One),
            Err(Error::KindMismatch(_))
        ));
    }

    #[test]
    fn split_weights_validated() {
        let m = golden();
        let pair = StrategyPair::symmetric(Boundary::constant_price(m, m.p_star).unwrap());
        let path = flat_path(0.5, 5);
        assert!(matches!(
            build_aggregate_split(&pair, &path, 1.0, 1.0, [1.2, -0.2]),
            Err(Error::InvalidSplit(_))
        ));
        assert!(matches!(
            build_aggregate_split(&pair, &path, 1.0, 1.0, [0.5, 0.6]),
            Err(Error::InvalidSplit(_))
        ));
    }

    #[test]
    fn symmetric_outcome_below_floor_rejected() {
        let m = golden();
        let pair = StrategyPair::symmetric(Boundary::dynamic_c(m, 1.0).unwrap());
        let path = flat_path(0.5, 5);
        assert!(matches!(
            build_symmetric_outcome(&pair, &path, 0.1, 1.0),
            Err(Error::DomainBelowFloor { .. })
        ));
    }

    #[test]
    fn corrupted_capital_is_flagged() {
        let m = golden();
        let b = Boundary::constant_price(m, m.p_star).unwrap();
        let pair = StrategyPair::symmetric(b);
        let path = generate_path(&m, 2.0, 1e-3, 2.0, 11, 0).unwrap();
        let mut o = build_abstain_outcome(&pair, &path, 1.0, 1.0, Firm::Two).unwrap();
        let clean = check_consistency(&o, &b, Firm::One, CONSISTENCY_TOL).unwrap();
        assert!(clean.passes(), "{clean:?}");
        o.q1[700] += 0.1;
        let dirty = check_consistency(&o, &b, Firm::One, CONSISTENCY_TOL).unwrap();
        assert!(dirty.violations.contains(&700));
        assert!(!dirty.passes());
    }

    #[test]
    fn discount_identity_constant_capital() {
        let disc = DiscountGrid::new(0.5, 0.01, 400);
        let q = vec![3.0; 401];
        assert!(discount_identity_defect(&q, &disc).abs() < 1e-5);
        assert_eq!(discounted_investment_cost(&q, 3.0, &disc), 0.0);
        assert_eq!(discounted_investment_cost(&q, 1.0, &disc), 2.0);
    }

    #[test]
    fn outcome_csv_dump() {
        let path = flat_path(0.5, 2);
        let o = Outcome::frozen(&path, 1.0, 2.0).unwrap();
        let mut buf = Vec::new();
        o.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("t,x,q1,q2"));
        assert_eq!(text.lines().count(), 4);
    }
}
