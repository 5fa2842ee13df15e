//! Randomized invariants of parameters, boundaries and value functions.

use capgame::boundaries::Boundary;
use capgame::model::{mu_gamma, positive_root};
use capgame::values::{Coord, Side};
use capgame::*;
use proptest::prelude::*;

fn golden() -> ModelParams {
    derive_params(1.0, 0.0, 2f64.sqrt(), 1.5).unwrap()
}

/// Independent root of the beta quadratic by bisection on `(0, 1e6)`.
fn beta_by_bisection(r: f64, mu: f64, sigma: f64) -> f64 {
    let f = |b: f64| 0.5 * sigma * sigma * b * b + (mu - 0.5 * sigma * sigma) * b - r;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn beta_matches_bisection(r in 0.01..0.5f64, mu in -0.2..0.2f64, sigma in 0.05..1.0f64) {
        let b = positive_root(r, mu, sigma);
        let oracle = beta_by_bisection(r, mu, sigma);
        prop_assert!((b - oracle).abs() < 1e-10 * oracle.max(1.0));
        prop_assert!(b > 0.0);
    }

    #[test]
    fn integrability_predicates_agree(r in 0.01..0.5f64, mu in -0.2..0.2f64, sigma in 0.05..1.0f64, gamma in 1.01..5.0f64) {
        let b = positive_root(r, mu, sigma);
        prop_assert_eq!(b > gamma, r > mu_gamma(mu, sigma, gamma));
    }

    #[test]
    fn marginal_profit_positive(x in 0.01..10.0f64, qi in 0.0..5.0f64, qmi in 0.01..5.0f64) {
        let m = golden();
        prop_assert!(m.marginal_profit(&State::new(x, qi, qmi)).unwrap() > 0.0);
    }

    #[test]
    fn capacity_equivalence(c in 0.0..2.0f64, x in 0.5..20.0f64, dq in 0.0..4.0f64, dqm in 0.0..4.0f64) {
        let m = golden();
        let b = Boundary::dynamic_c(m, c).unwrap();
        let f = b.q_floor().max(1e-3);
        let (qi, qmi) = (f + dq, f + dqm);
        let t = b.trigger(qi, qmi).unwrap();
        prop_assume!((x - t).abs() > 1e-8 * t);
        let phi = b.base_capacity(x, qmi).unwrap();
        prop_assert_eq!(qi < phi, x > t);
        if phi > 0.0 {
            prop_assert!((b.trigger(phi, qmi).unwrap() - x).abs() < 1e-10 * x);
        }
    }

    #[test]
    fn dynamic_trigger_increasing_and_above_p_star(c in 0.0..2.0f64, dq in 0.0..4.0f64, dqm in 0.0..4.0f64) {
        let m = golden();
        let b = Boundary::dynamic_c(m, c).unwrap();
        let f = b.q_floor().max(1e-3);
        let (qi, qmi) = (f + dq, f + dqm);
        let t = b.trigger(qi, qmi).unwrap();
        let h = 1e-6;
        prop_assert!(b.trigger(qi + h, qmi).unwrap() > t);
        prop_assert!(b.trigger(qi, qmi + h).unwrap() > t);
        prop_assert!(t >= m.p_star * (qi + qmi).powf(1.0 / m.gamma));
    }

    #[test]
    fn psi_round_trip(x in 3.0..50.0f64) {
        let m = golden();
        let b = Boundary::dynamic_c(m, 1.0).unwrap();
        let q = b.psi(x).unwrap();
        if q > b.q_floor() {
            prop_assert!((b.symmetric_trigger(q).unwrap() - x).abs() < 1e-10 * x);
        } else {
            prop_assert!(x <= b.symmetric_trigger(q).unwrap());
        }
    }

    #[test]
    fn inv_minus_abs_sign_follows_threshold(
        k in 0usize..4,
        frac in 0.05..1.0f64,
        qi in 0.1..5.0f64,
        qmi in 0.1..5.0f64,
    ) {
        let m = golden();
        let ratio = [0.8, 0.9, 1.1, 1.2][k];
        let p = ratio * m.p_star;
        let inv = ValueFn::inv(m, p).unwrap();
        let abs = ValueFn::abs(m, p).unwrap();
        // Below both triggers.
        let t = Boundary::constant_price(m, p).unwrap().trigger(qi, qmi).unwrap();
        let s = State::new(frac * t, qi, qmi);
        let d = inv.value(&s).unwrap() - abs.value(&s).unwrap();
        prop_assert_eq!(d > 0.0, ratio > 1.0, "gap {}", d);
    }

    #[test]
    fn abs_marginal_increasing_in_x(f1 in 0.05..0.99f64, f2 in 0.05..0.99f64, qi in 0.1..5.0f64, qmi in 0.1..5.0f64) {
        prop_assume!((f1 - f2).abs() > 1e-3);
        let m = golden();
        let v = ValueFn::abs(m, m.p_star).unwrap();
        let t = v.boundary().trigger(qi, qmi).unwrap();
        let (lo, hi) = if f1 < f2 { (f1, f2) } else { (f2, f1) };
        let a = v.fd_derivative(&State::new(lo * t, qi, qmi), Coord::Own, Side::Central).unwrap();
        let b = v.fd_derivative(&State::new(hi * t, qi, qmi), Coord::Own, Side::Central).unwrap();
        prop_assert!(b > a);
    }
}

#[test]
fn beta_monotone_in_volatility_and_drift() {
    let r = 0.1;
    for &mu in &[-0.05, 0.0, 0.05] {
        let mut prev = f64::INFINITY;
        for k in 1..20 {
            let b = positive_root(r, mu, 0.05 * k as f64);
            assert!(b < prev);
            prev = b;
        }
    }
    for &sigma in &[0.1, 0.3] {
        let mut prev = f64::INFINITY;
        for k in 0..10 {
            let b = positive_root(r, -0.05 + 0.01 * k as f64, sigma);
            assert!(b < prev);
            prev = b;
        }
    }
}

#[test]
fn trigger_unbounded_in_own_capital() {
    let m = golden();
    for b in [
        Boundary::dynamic_c(m, 1.0).unwrap(),
        Boundary::constant_price(m, 2.0).unwrap(),
    ] {
        assert!(b.trigger(1e12, 1.0).unwrap() > 1e7);
    }
}

#[test]
fn dynamic_value_at_floor_edge_satisfies_marginal_bound() {
    let m = golden();
    let v = ValueFn::dynamic(m, 1.0).unwrap();
    let f = v.q_floor();
    for &qmi in &[f, f + 0.5, f + 3.0] {
        for &frac in &[0.2, 0.6, 1.0] {
            let t = v.boundary().trigger(f, qmi).unwrap();
            let d = v.partials(&State::new(frac * t, f, qmi)).unwrap();
            assert!(d.v_qi <= 1.0 + 1e-7, "v_qi {} at qmi {qmi}", d.v_qi);
        }
    }
}

#[test]
fn dynamic_opponent_marginal_nonpositive_below_diagonal() {
    // q_i < q_mi at the own trigger: V_qmi <= 0 without equality.
    let m = golden();
    for &c in &[0.5, 1.0] {
        let v = ValueFn::dynamic(m, c).unwrap();
        let f = v.q_floor();
        for &(qi, qmi) in &[(f, f + 1.0), (f + 0.5, f + 4.0)] {
            let t = v.boundary().trigger(qi, qmi).unwrap();
            let d = v.partials(&State::new(t, qi, qmi)).unwrap();
            assert!(d.v_qmi <= 1e-9, "c={c}: {}", d.v_qmi);
        }
    }
}

#[test]
fn pareto_ranking_over_states() {
    let m = golden();
    let vs: Vec<ValueFn> = [0.0, 0.25, 0.5, 1.0]
        .iter()
        .map(|&c| ValueFn::dynamic(m, c).unwrap())
        .collect();
    let b0 = Boundary::dynamic_c(m, 0.0).unwrap();
    for &(qi, qmi) in &[(0.8, 0.8), (1.0, 2.0), (3.0, 1.0)] {
        for &frac in &[0.1, 0.5, 0.95] {
            let s = State::new(frac * b0.trigger(qi, qmi).unwrap(), qi, qmi);
            let vals: Vec<f64> = vs.iter().map(|v| v.value(&s).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[1] >= w[0] - 1e-7), "{vals:?}");
        }
    }
}

#[test]
fn errors_are_typed() {
    let m = golden();
    assert!(matches!(
        m.inverse_demand(0.0),
        Err(Error::DomainZeroCapacity(_))
    ));
    assert!(matches!(
        Boundary::constant_price(m, 1.0).unwrap().psi(1.0),
        Err(Error::KindMismatch(_))
    ));
    assert!(matches!(
        derive_params(1.0, 0.0, 2f64.sqrt(), 1.7),
        Err(Error::Integrability { .. })
    ));
    assert!(matches!(
        derive_params(1.0, 0.0, 2f64.sqrt(), 1.0),
        Err(Error::ParamDomain(_))
    ));
}
