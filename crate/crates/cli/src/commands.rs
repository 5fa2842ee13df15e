//! Subcommand bodies. Each maps a [`RunConfig`] to the text it emits.

use capgame::boundaries::{Boundary, BoundaryKind};
use capgame::mc::{self, McSettings, OutcomeSpec, Start};
use capgame::verify::{self, Candidate, Tolerances};
use capgame::{Firm, ModelParams, Partials, Primitives, State, StrategyPair, ValueFn, ValueKind};
use serde::Serialize;

use crate::config::{RunConfig, SweepAxis};
use crate::CliError;

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

pub fn derive(cfg: &RunConfig) -> Result<String, CliError> {
    Ok(to_json(&cfg.params()?.derive()?))
}

#[derive(Debug, Serialize)]
struct ValueRow {
    x: f64,
    q_i: f64,
    q_mi: f64,
    #[serde(flatten)]
    partials: Partials,
}

pub fn value(cfg: &RunConfig) -> Result<String, CliError> {
    let v = ValueFn::new(cfg.params()?.derive()?, cfg.value_kind()?)?;
    let rows = cfg
        .states()?
        .iter()
        .map(|&[x, q_i, q_mi]| {
            Ok(ValueRow {
                x,
                q_i,
                q_mi,
                partials: v.partials(&State::new(x, q_i, q_mi))?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(to_json(&rows))
}

/// Strategies under which a value family is the candidate value of firm `i`:
/// `[own, opponent]`.
fn default_strategies(kind: ValueKind) -> [BoundaryKind; 2] {
    match kind {
        ValueKind::Abs { p } => [BoundaryKind::Infinite, BoundaryKind::ConstantPrice { p }],
        ValueKind::Inv { p } => [BoundaryKind::ConstantPrice { p }, BoundaryKind::Infinite],
        ValueKind::C { c } => [BoundaryKind::DynamicC { c }; 2],
    }
}

/// Returns the JSON report and the failing condition keys.
pub fn verify(cfg: &RunConfig) -> Result<(String, Vec<&'static str>), CliError> {
    let m = cfg.params()?.derive()?;
    let kind = cfg.value_kind()?;
    let [own, opp] = match cfg.strategies.or(cfg.strategy.map(|s| [s, s])) {
        Some(pair) => pair,
        None => default_strategies(kind),
    };
    let cand = Candidate::new(
        ValueFn::new(m, kind)?,
        Boundary::new(m, own)?,
        Boundary::new(m, opp)?,
    );
    let grid = cfg.grid.map(|g| g.spec()).unwrap_or_default();
    let report = verify::verify(&cand, &grid, &Tolerances::default())?;
    Ok((to_json(&report), report.failing()))
}

/// Outcome used when the configuration names none.
fn default_outcome(pair: &StrategyPair) -> Result<OutcomeSpec, CliError> {
    if pair.first != pair.second {
        return Ok(OutcomeSpec::Sequential { mover: Firm::One });
    }
    Ok(match pair.first.kind {
        BoundaryKind::Infinite => OutcomeSpec::Frozen,
        _ => mc::equilibrium_outcome(&pair.first, Firm::One)?,
    })
}

pub fn simulate(cfg: &RunConfig) -> Result<String, CliError> {
    let m = cfg.params()?.derive()?;
    let [s1, s2] = cfg.strategy_pair()?;
    let pair = StrategyPair::new(Boundary::new(m, s1)?, Boundary::new(m, s2)?);
    let spec = match cfg.outcome {
        Some(o) => o,
        None => default_outcome(&pair)?,
    };
    let [x, q1, q2] = match cfg.states()? {
        [one] => *one,
        _ => return Err(CliError::Usage("simulate takes exactly one state".into())),
    };
    let settings: McSettings = cfg.mc.unwrap_or_default().settings()?;
    let firm = cfg.firm.unwrap_or(Firm::One);
    let est = mc::estimate_payoff(&m, &pair, spec, Start { x, q1, q2 }, firm, &settings)?;
    Ok(to_json(&est))
}

const SWEEP_HEADER: [&str; 18] = [
    "r",
    "mu",
    "sigma",
    "gamma",
    "beta",
    "p_star",
    "mu_gamma",
    "kind",
    "level",
    "x",
    "q_i",
    "q_mi",
    "value",
    "v_x",
    "v_xx",
    "v_qi",
    "v_qmi",
    "investing",
];

fn with_level(kind: ValueKind, level: f64) -> ValueKind {
    match kind {
        ValueKind::Abs { .. } => ValueKind::Abs { p: level },
        ValueKind::Inv { .. } => ValueKind::Inv { p: level },
        ValueKind::C { .. } => ValueKind::C { c: level },
    }
}

fn kind_name(kind: ValueKind) -> (&'static str, f64) {
    match kind {
        ValueKind::Abs { p } => ("abs", p),
        ValueKind::Inv { p } => ("inv", p),
        ValueKind::C { c } => ("c", c),
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn sweep_row(m: &ModelParams, kind: ValueKind, s: [f64; 3], d: &Partials) -> Vec<String> {
    let (name, level) = kind_name(kind);
    let mut row: Vec<String> = [m.r, m.mu, m.sigma, m.gamma, m.beta, m.p_star, m.mu_gamma]
        .iter()
        .map(|&v| num(v))
        .collect();
    row.push(name.to_string());
    row.push(num(level));
    row.extend(
        [s[0], s[1], s[2], d.value, d.v_x, d.v_xx, d.v_qi, d.v_qmi]
            .iter()
            .map(|&v| num(v)),
    );
    row.push(d.investing.to_string());
    row
}

/// One CSV row per (sweep value, state) in input order.
pub fn sweep(cfg: &RunConfig) -> Result<String, CliError> {
    let base = cfg.params()?;
    let kind = cfg.value_kind()?;
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| crate::config::missing("sweep"))?;
    let states = cfg.states()?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for &level in &spec.values {
        let (p, k) = match spec.axis {
            SweepAxis::R => (Primitives { r: level, ..base }, kind),
            SweepAxis::Mu => (Primitives { mu: level, ..base }, kind),
            SweepAxis::Sigma => (
                Primitives {
                    sigma: level,
                    ..base
                },
                kind,
            ),
            SweepAxis::Gamma => (
                Primitives {
                    gamma: level,
                    ..base
                },
                kind,
            ),
            SweepAxis::Level => (base, with_level(kind, level)),
        };
        let m = p.derive()?;
        let v = ValueFn::new(m, k)?;
        for &s in states {
            let d = v.partials(&State::new(s[0], s[1], s[2]))?;
            w.write_record(sweep_row(&m, k, s, &d)).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ascii"))
}
