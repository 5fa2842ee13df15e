//! Monte Carlo estimates of discounted payoffs along constructed outcomes,
//! and deviation experiments with common random numbers.
//!
//! Path `k` of a run always uses the random stream `(seed, k)`, so two runs
//! with the same seed see the same shocks whatever the outcome construction
//! or thread count. Per-path results are collected in index order and reduced
//! sequentially.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundaries::{Boundary, BoundaryKind};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::outcomes::{
    build_abstain_outcome, build_aggregate_split, build_sequential_outcome,
    build_symmetric_outcome, discount_identity_defect, discounted_investment_cost, DiscountGrid,
    Firm, Outcome, StrategyPair,
};
use crate::paths::{generate_path, step_count, ShockPath};
use crate::values::ValueFn;

/// How the joint capital paths are built from the strategy pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case", deny_unknown_fields)]
pub enum OutcomeSpec {
    Frozen,
    Abstain { abstainer: Firm },
    Symmetric,
    Split { weights: [f64; 2] },
    Sequential { mover: Firm },
}

impl OutcomeSpec {
    pub fn build<'p>(
        &self,
        pair: &StrategyPair,
        path: &'p ShockPath,
        q1_0: f64,
        q2_0: f64,
    ) -> Result<Outcome<'p>> {
        match *self {
            OutcomeSpec::Frozen => Outcome::frozen(path, q1_0, q2_0),
            OutcomeSpec::Abstain { abstainer } => {
                build_abstain_outcome(pair, path, q1_0, q2_0, abstainer)
            }
            OutcomeSpec::Symmetric => build_symmetric_outcome(pair, path, q1_0, q2_0),
            OutcomeSpec::Split { weights } => {
                build_aggregate_split(pair, path, q1_0, q2_0, weights)
            }
            OutcomeSpec::Sequential { mover } => {
                build_sequential_outcome(pair, path, q1_0, q2_0, mover)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSettings {
    pub paths: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
}

/// Initial shock and capitals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Start {
    pub x: f64,
    pub q1: f64,
    pub q2: f64,
}

/// Everything a run keeps from one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathRecord {
    /// Discounted profit minus discounted investment cost, per firm.
    pub payoff: [f64; 2],
    pub x_terminal: f64,
    pub q_terminal: [f64; 2],
    /// Defect of the integration-by-parts discount identity, per firm.
    pub identity_defect: [f64; 2],
    pub max_capital: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PayoffEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    /// `e^{-rT}` times the mean of a linear bound on the continuation value
    /// at the horizon. Reported apart from the sampling error.
    pub tail_bound: f64,
}

/// Sample mean and standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Discounted profit and cost along one outcome. Profit uses midpoint shock
/// and capitals with midpoint discounting; the inverse demand is reused while
/// the midpoint aggregate is unchanged.
pub fn path_payoffs(
    params: &ModelParams,
    outcome: &Outcome<'_>,
    disc: &DiscountGrid,
) -> Result<[f64; 2]> {
    let xs = &outcome.path.values;
    let (q1, q2) = (&outcome.q1, &outcome.q2);
    let dt = outcome.path.dt;
    let expo = -1.0 / params.gamma;
    let mut profit = [0.0; 2];
    let mut last_total = f64::NAN;
    let mut price = 0.0;
    for k in 0..xs.len() - 1 {
        let a = 0.5 * (q1[k] + q1[k + 1]);
        let b = 0.5 * (q2[k] + q2[k + 1]);
        let total = a + b;
        if total != last_total {
            if !(total > 0.0) {
                return Err(Error::DomainZeroCapacity(total));
            }
            price = total.powf(expo);
            last_total = total;
        }
        let w = disc.mid[k] * 0.5 * (xs[k] + xs[k + 1]) * price * dt;
        profit[0] += w * a;
        profit[1] += w * b;
    }
    Ok([
        profit[0] - discounted_investment_cost(q1, outcome.q1_0, disc),
        profit[1] - discounted_investment_cost(q2, outcome.q2_0, disc),
    ])
}

/// Runs `settings.paths` paths, building each outcome with `spec` and handing
/// it to `inspect` before it is dropped. Results come back in path order.
pub fn run_paths_with<R, F>(
    params: &ModelParams,
    pair: &StrategyPair,
    spec: OutcomeSpec,
    start: Start,
    settings: &McSettings,
    inspect: F,
) -> Result<Vec<(PathRecord, R)>>
where
    R: Send,
    F: Fn(&Outcome<'_>) -> Result<R> + Sync,
{
    if settings.paths == 0 {
        return Err(Error::ParamDomain("path count must be positive".into()));
    }
    let steps = step_count(settings.dt, settings.horizon)?;
    let disc = DiscountGrid::new(params.r, settings.dt, steps);
    (0..settings.paths as u64)
        .into_par_iter()
        .map(|k| {
            let path = generate_path(
                params,
                start.x,
                settings.dt,
                settings.horizon,
                settings.seed,
                k,
            )?;
            let outcome = spec.build(pair, &path, start.q1, start.q2)?;
            let payoff = path_payoffs(params, &outcome, &disc)?;
            let last = steps;
            let record = PathRecord {
                payoff,
                x_terminal: path.values[last],
                q_terminal: [outcome.q1[last], outcome.q2[last]],
                identity_defect: [
                    discount_identity_defect(&outcome.q1, &disc),
                    discount_identity_defect(&outcome.q2, &disc),
                ],
                max_capital: outcome.q1[last].max(outcome.q2[last]),
            };
            Ok((record, inspect(&outcome)?))
        })
        .collect()
}

pub fn run_paths(
    params: &ModelParams,
    pair: &StrategyPair,
    spec: OutcomeSpec,
    start: Start,
    settings: &McSettings,
) -> Result<Vec<PathRecord>> {
    Ok(
        run_paths_with(params, pair, spec, start, settings, |_| Ok(()))?
            .into_iter()
            .map(|(r, _)| r)
            .collect(),
    )
}

/// Coefficient `k` of a linear bound `|V| <= k (q_1 + q_2)` for the
/// continuation values of a strategy pair, from the candidate value families.
pub fn tail_coefficient(pair: &StrategyPair) -> Result<f64> {
    let mut k: f64 = 0.0;
    for b in [pair.first, pair.second] {
        let m = b.params;
        let here = match b.kind {
            BoundaryKind::ConstantPrice { p } => ValueFn::abs(m, p)?
                .linear_bound_coefficient()
                .max(ValueFn::inv(m, p)?.linear_bound_coefficient()),
            BoundaryKind::DynamicC { c } => ValueFn::dynamic(m, c)?.linear_bound_coefficient(),
            BoundaryKind::Infinite => 0.0,
        };
        k = k.max(here);
    }
    Ok(k)
}

/// Reduces per-path records to an estimate for `firm`. The tail adds the
/// frozen-capital perpetuity `X_T P Q_T / (r - mu)` to the linear bound.
pub fn summarize(
    params: &ModelParams,
    records: &[PathRecord],
    firm: Firm,
    k: f64,
    settings: &McSettings,
) -> PayoffEstimate {
    let idx = firm as usize;
    let payoffs: Vec<f64> = records.iter().map(|r| r.payoff[idx]).collect();
    let (mean, se) = mean_se(&payoffs);
    let steps = (settings.horizon / settings.dt).round();
    let disc = (-params.r * steps * settings.dt).exp();
    let tail: f64 = records
        .iter()
        .map(|r| {
            let total = r.q_terminal[0] + r.q_terminal[1];
            let perpetuity = r.x_terminal * total.powf(-1.0 / params.gamma) * r.q_terminal[idx]
                / params.net_rate();
            k * total + perpetuity
        })
        .sum::<f64>()
        / records.len() as f64;
    PayoffEstimate {
        mean,
        se,
        n: records.len(),
        dt: settings.dt,
        horizon: steps * settings.dt,
        tail_bound: disc * tail,
    }
}

pub fn estimate_payoff(
    params: &ModelParams,
    pair: &StrategyPair,
    spec: OutcomeSpec,
    start: Start,
    firm: Firm,
    settings: &McSettings,
) -> Result<PayoffEstimate> {
    let records = run_paths(params, pair, spec, start, settings)?;
    Ok(summarize(
        params,
        &records,
        firm,
        tail_coefficient(pair)?,
        settings,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationReport {
    pub deviant: PayoffEstimate,
    pub equilibrium: PayoffEstimate,
    /// Mean and standard error of the paired per-path difference
    /// `deviant - equilibrium`.
    pub gap: f64,
    pub gap_se: f64,
}

impl DeviationReport {
    /// The deviation does not pay beyond `z` paired standard errors plus `band`.
    pub fn not_profitable(&self, z: f64, band: f64) -> bool {
        self.gap <= z * self.gap_se + band
    }
}

/// The equilibrium construction for a symmetric strategy pair: catch-up for
/// the dynamic family, otherwise the outcome where `firm` abstains.
pub fn equilibrium_outcome(equilibrium: &Boundary, firm: Firm) -> Result<OutcomeSpec> {
    match equilibrium.kind {
        BoundaryKind::DynamicC { .. } => Ok(OutcomeSpec::Symmetric),
        BoundaryKind::ConstantPrice { .. } => Ok(OutcomeSpec::Abstain { abstainer: firm }),
        BoundaryKind::Infinite => Err(Error::KindMismatch(
            "the infinite boundary is not an equilibrium strategy".into(),
        )),
    }
}

/// Firm `firm` switches to `deviant` while the opponent keeps `equilibrium`.
/// The deviant joint outcome uses sequential per-step updates with the
/// deviant moving first; both sides share the random numbers.
pub fn deviation_experiment(
    params: &ModelParams,
    equilibrium: &Boundary,
    deviant: &Boundary,
    firm: Firm,
    start: Start,
    settings: &McSettings,
) -> Result<DeviationReport> {
    let eq_pair = StrategyPair::symmetric(*equilibrium);
    let eq_spec = equilibrium_outcome(equilibrium, firm)?;
    let (dev_pair, dev_spec) = if deviant == equilibrium {
        (eq_pair, eq_spec)
    } else {
        let pair = match firm {
            Firm::One => StrategyPair::new(*deviant, *equilibrium),
            Firm::Two => StrategyPair::new(*equilibrium, *deviant),
        };
        (pair, OutcomeSpec::Sequential { mover: firm })
    };
    let eq = run_paths(params, &eq_pair, eq_spec, start, settings)?;
    let dev = run_paths(params, &dev_pair, dev_spec, start, settings)?;
    let idx = firm as usize;
    let diffs: Vec<f64> = dev
        .iter()
        .zip(&eq)
        .map(|(d, e)| d.payoff[idx] - e.payoff[idx])
        .collect();
    let (gap, gap_se) = mean_se(&diffs);
    Ok(DeviationReport {
        deviant: summarize(params, &dev, firm, tail_coefficient(&dev_pair)?, settings),
        equilibrium: summarize(params, &eq, firm, tail_coefficient(&eq_pair)?, settings),
        gap,
        gap_se,
    })
}

/// Net present value per unit of capital added at a constant price
/// threshold `p`: `V^abs / q_i - 1 = p / p* - 1` at the boundary.
pub fn npv_at_boundary(params: &ModelParams, p: f64) -> f64 {
    p / params.p_star - 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::derive_params;

    fn golden() -> ModelParams {
        derive_params(1.0, 0.0, 2f64.sqrt(), 1.5).unwrap()
    }

    #[test]
    fn npv_examples() {
        let m = golden();
        assert_eq!(npv_at_boundary(&m, m.p_star), 0.0);
        assert!((npv_at_boundary(&m, 1.2 * m.p_star) - 0.2).abs() < 1e-15);
        assert!((npv_at_boundary(&m, 0.8 * m.p_star) + 0.2).abs() < 1e-15);
    }

    #[test]
    fn mean_se_of_constant_and_pair() {
        assert_eq!(mean_se(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, s) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn frozen_payoff_is_a_perpetuity() {
        // x P q_i = 1 with r - mu = 1: payoff 1 - e^{-T} on a finite horizon.
        let m = golden();
        let pair = StrategyPair::symmetric(Boundary::infinite(m));
        let settings = McSettings {
            paths: 4000,
            dt: 0.01,
            horizon: 20.0,
            seed: 11,
        };
        let est = estimate_payoff(
            &m,
            &pair,
            OutcomeSpec::Frozen,
            Start {
                x: 1.0,
                q1: 1.0,
                q2: 0.0,
            },
            Firm::One,
            &settings,
        )
        .unwrap();
        assert!((est.mean - 1.0).abs() < 3.0 * est.se + 1e-3, "{est:?}");
    }

    #[test]
    fn identical_deviation_is_exactly_zero() {
        let m = golden();
        let b = Boundary::dynamic_c(m, 1.0).unwrap();
        let settings = McSettings {
            paths: 50,
            dt: 0.01,
            horizon: 2.0,
            seed: 5,
        };
        let start = Start {
            x: 2.0,
            q1: 1.0,
            q2: 1.5,
        };
        let r = deviation_experiment(&m, &b, &b, Firm::One, start, &settings).unwrap();
        assert_eq!(r.gap, 0.0);
        assert_eq!(r.gap_se, 0.0);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let m = golden();
        let pair = StrategyPair::symmetric(Boundary::constant_price(m, m.p_star).unwrap());
        let settings = McSettings {
            paths: 64,
            dt: 0.01,
            horizon: 3.0,
            seed: 3,
        };
        let start = Start {
            x: 2.0,
            q1: 1.0,
            q2: 1.0,
        };
        let spec = OutcomeSpec::Abstain {
            abstainer: Firm::One,
        };
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one
            .install(|| run_paths(&m, &pair, spec, start, &settings))
            .unwrap();
        let b = four
            .install(|| run_paths(&m, &pair, spec, start, &settings))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let s = OutcomeSpec::Abstain {
            abstainer: Firm::Two,
        };
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"outcome":"abstain","abstainer":"2"}"#);
        assert_eq!(serde_json::from_str::<OutcomeSpec>(&text).unwrap(), s);
    }
}
