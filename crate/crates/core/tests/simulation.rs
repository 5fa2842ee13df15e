//! Outcome constructions and Monte Carlo payoffs on simulated paths.

use capgame::boundaries::Boundary;
use capgame::mc::{self, McSettings, OutcomeSpec, Start};
use capgame::outcomes::{
    build_abstain_outcome, build_aggregate_split, build_symmetric_outcome, check_consistency,
    CONSISTENCY_TOL,
};
use capgame::paths::discounted_sup_power_integral;
use capgame::*;

fn golden() -> ModelParams {
    derive_params(1.0, 0.0, 2f64.sqrt(), 1.5).unwrap()
}

/// Parameters where investment payoffs have a finite second moment
/// (`2r > mu_{2 gamma}`), so standard errors are meaningful.
fn calm() -> ModelParams {
    derive_params(1.0, 0.0, 0.5, 1.5).unwrap()
}

#[test]
fn terminal_mean_matches_drift() {
    let m = derive_params(0.2, 0.05, 0.3, 1.5).unwrap();
    let (x0, t) = (1.5, 2.0);
    let xs: Vec<f64> = (0..100_000u64)
        .map(|k| generate_path(&m, x0, 0.25, t, 9, k).unwrap().terminal())
        .collect();
    let (mean, se) = mc::mean_se(&xs);
    let expected = x0 * (m.mu * t).exp();
    assert!(
        (mean - expected).abs() < 3.0 * se,
        "{mean} vs {expected} (se {se})"
    );
}

#[test]
fn discounted_sup_integral_stabilizes_only_when_integrable() {
    let mean_at = |m: &ModelParams, t: f64| {
        let s: f64 = (0..10_000u64)
            .map(|k| {
                discounted_sup_power_integral(
                    &generate_path(m, 1.0, 0.05, t, 4, k).unwrap(),
                    m.r,
                    m.gamma,
                )
            })
            .sum();
        s / 10_000.0
    };
    let good = derive_params(0.5, 0.0, 0.3, 1.5).unwrap();
    let (a, b) = (mean_at(&good, 20.0), mean_at(&good, 40.0));
    assert!((b - a).abs() / a < 0.01, "{a} -> {b}");

    // r below mu_gamma: the same functional keeps growing.
    let m = ModelParams {
        r: 0.05,
        ..derive_params(0.5, 0.1, 0.3, 2.0).unwrap()
    };
    let (a, b) = (mean_at(&m, 20.0), mean_at(&m, 40.0));
    assert!(b > 1.5 * a, "{a} -> {b}");
}

#[test]
fn abstain_outcome_is_consistent_with_both_strategies() {
    let m = golden();
    let p = m.p_star;
    let investor = Boundary::constant_price(m, p).unwrap();
    for abstainer_b in [
        Boundary::infinite(m),
        Boundary::constant_price(m, 1.3 * p).unwrap(),
        investor,
    ] {
        let pair = StrategyPair::new(abstainer_b, investor);
        for k in 0..20 {
            let path = generate_path(&m, 2.0, 1e-2, 5.0, 2, k).unwrap();
            let o = build_abstain_outcome(&pair, &path, 1.0, 0.5, Firm::One).unwrap();
            assert!(o.q1.iter().all(|&q| q == 1.0));
            assert!(check_consistency(&o, &investor, Firm::Two, CONSISTENCY_TOL)
                .unwrap()
                .passes());
            assert!(
                check_consistency(&o, &abstainer_b, Firm::One, CONSISTENCY_TOL)
                    .unwrap()
                    .passes()
            );
            // Closed-form investor capital.
            let mut sup = 0.0f64;
            for (j, &x) in path.values.iter().enumerate() {
                sup = sup.max((x / p).powf(m.gamma) - 1.0);
                assert!((o.q2[j] - sup.max(0.5)).abs() <= 1e-12 * o.q2[j]);
            }
        }
    }
}

#[test]
fn unit_split_reproduces_abstain() {
    let m = golden();
    let pair = StrategyPair::symmetric(Boundary::constant_price(m, m.p_star).unwrap());
    for k in 0..20 {
        let path = generate_path(&m, 2.5, 1e-2, 5.0, 3, k).unwrap();
        for (w, abstainer) in [([1.0, 0.0], Firm::Two), ([0.0, 1.0], Firm::One)] {
            let split = build_aggregate_split(&pair, &path, 1.0, 0.7, w).unwrap();
            let abs = build_abstain_outcome(&pair, &path, 1.0, 0.7, abstainer).unwrap();
            for j in 0..path.values.len() {
                assert!((split.q1[j] - abs.q1[j]).abs() <= 1e-12 * abs.q1[j]);
                assert!((split.q2[j] - abs.q2[j]).abs() <= 1e-12 * abs.q2[j]);
            }
        }
        let half = build_aggregate_split(&pair, &path, 1.0, 1.0, [0.5, 0.5]).unwrap();
        assert_eq!(half.q1, half.q2);
        for f in [Firm::One, Firm::Two] {
            assert!(check_consistency(&half, &pair.first, f, CONSISTENCY_TOL)
                .unwrap()
                .passes());
        }
    }
}

#[test]
fn symmetric_outcome_at_zero_offset_shares_the_abstain_aggregate() {
    let m = golden();
    let sym = StrategyPair::symmetric(Boundary::dynamic_c(m, 0.0).unwrap());
    let cp = StrategyPair::symmetric(Boundary::constant_price(m, m.p_star).unwrap());
    for k in 0..20 {
        let path = generate_path(&m, 2.0, 1e-2, 5.0, 5, k).unwrap();
        let a = build_symmetric_outcome(&sym, &path, 0.6, 1.1).unwrap();
        let b = build_abstain_outcome(&cp, &path, 0.6, 1.1, Firm::Two).unwrap();
        for j in 0..path.values.len() {
            assert!(
                (a.aggregate(j) - b.aggregate(j)).abs() <= 1e-10 * b.aggregate(j),
                "path {k} step {j}"
            );
        }
    }
}

#[test]
fn symmetric_outcome_smaller_firm_moves_first() {
    let m = golden();
    let b = Boundary::dynamic_c(m, 0.5).unwrap();
    let pair = StrategyPair::symmetric(b);
    let x0 = b.trigger(1.0, 2.0).unwrap();
    let mut saw_catch_up = false;
    for k in 0..50 {
        let path = generate_path(&m, x0, 1e-2, 10.0, 6, k).unwrap();
        let o = build_symmetric_outcome(&pair, &path, 1.0, 2.0).unwrap();
        let cu = capgame::outcomes::catch_up_report(&o, &b).unwrap();
        assert!(cu.holds(1e-9), "{cu:?}");
        saw_catch_up |= cu.tau.is_some();
    }
    assert!(saw_catch_up);
}

#[test]
fn constant_threshold_payoff_indifference() {
    // Abstaining, investing alone and sharing investment are all worth the
    // same to each firm at p*.
    let m = calm();
    let pair = StrategyPair::symmetric(Boundary::constant_price(m, m.p_star).unwrap());
    let start = Start {
        x: 0.8 * m.p_star * 2f64.powf(1.0 / m.gamma),
        q1: 1.0,
        q2: 1.0,
    };
    let s = McSettings {
        paths: 10_000,
        dt: 1e-3,
        horizon: 10.0,
        seed: 31,
    };
    let v = ValueFn::abs(m, m.p_star)
        .unwrap()
        .value(&State::new(start.x, 1.0, 1.0))
        .unwrap();
    let runs: Vec<Vec<mc::PathRecord>> = [
        OutcomeSpec::Abstain {
            abstainer: Firm::One,
        },
        OutcomeSpec::Abstain {
            abstainer: Firm::Two,
        },
        OutcomeSpec::Split {
            weights: [0.5, 0.5],
        },
    ]
    .iter()
    .map(|&spec| mc::run_paths(&m, &pair, spec, start, &s).unwrap())
    .collect();
    for f in 0..2 {
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let d: Vec<f64> = runs[a]
                .iter()
                .zip(&runs[b])
                .map(|(x, y)| x.payoff[f] - y.payoff[f])
                .collect();
            let (gap, se) = mc::mean_se(&d);
            // The grid supremum shifts who pays for the overshoot at O(sqrt(dt)).
            assert!(
                gap.abs() < 3.0 * se + 0.01 * v,
                "firm {f} runs {a},{b}: {gap} (se {se})"
            );
        }
    }
}

#[test]
fn symmetric_zero_offset_payoff_matches_closed_form() {
    let m = calm();
    let pair = StrategyPair::symmetric(Boundary::dynamic_c(m, 0.0).unwrap());
    let start = Start {
        x: 0.5 * m.p_star * 2f64.powf(1.0 / m.gamma),
        q1: 1.0,
        q2: 1.0,
    };
    let s = McSettings {
        paths: 20_000,
        dt: 1e-3,
        horizon: 20.0,
        seed: 37,
    };
    let est = mc::estimate_payoff(&m, &pair, OutcomeSpec::Symmetric, start, Firm::One, &s).unwrap();
    let v = ValueFn::abs(m, m.p_star)
        .unwrap()
        .value(&State::new(start.x, 1.0, 1.0))
        .unwrap();
    assert!(
        (est.mean - v).abs() < 3.0 * est.se + 0.01 * v,
        "{est:?} vs {v}"
    );
}

#[test]
fn preempting_a_dynamic_opponent_does_not_pay() {
    let m = calm();
    let eq = Boundary::dynamic_c(m, 1.0).unwrap();
    let dev = Boundary::constant_price(m, m.p_star).unwrap();
    let f = eq.q_floor();
    let (q1, q2) = (f + 0.5, f + 0.5);
    let start = Start {
        x: 0.9 * eq.trigger(q1, q2).unwrap(),
        q1,
        q2,
    };
    let s = McSettings {
        paths: 10_000,
        dt: 1e-2,
        horizon: 20.0,
        seed: 47,
    };
    let r = mc::deviation_experiment(&m, &eq, &dev, Firm::One, start, &s).unwrap();
    let v = ValueFn::dynamic(m, 1.0)
        .unwrap()
        .value(&State::new(start.x, q1, q2))
        .unwrap();
    assert!(r.not_profitable(3.0, 0.01 * v.abs()), "{r:?}");
}

#[test]
fn pareto_ranking_corroborated_by_simulation() {
    let m = calm();
    let (q1, q2) = (1.5, 1.5);
    let b1 = Boundary::dynamic_c(m, 1.0).unwrap();
    assert!(b1.q_floor() <= q1);
    let start = Start {
        x: 0.5
            * Boundary::dynamic_c(m, 0.0)
                .unwrap()
                .trigger(q1, q2)
                .unwrap(),
        q1,
        q2,
    };
    let s = McSettings {
        paths: 10_000,
        dt: 1e-2,
        horizon: 20.0,
        seed: 53,
    };
    let est = |c: f64| {
        let pair = StrategyPair::symmetric(Boundary::dynamic_c(m, c).unwrap());
        mc::run_paths(&m, &pair, OutcomeSpec::Symmetric, start, &s).unwrap()
    };
    let (a, b) = (est(0.0), est(1.0));
    let d: Vec<f64> = b
        .iter()
        .zip(&a)
        .map(|(x, y)| x.payoff[0] - y.payoff[0])
        .collect();
    let (gap, se) = mc::mean_se(&d);
    assert!(gap > -3.0 * se, "{gap} (se {se})");
}
