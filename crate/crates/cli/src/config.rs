//! Run configuration: a JSON file, optionally overridden by flags.

use std::path::{Path, PathBuf};

use capgame::boundaries::BoundaryKind;
use capgame::mc::{McSettings, OutcomeSpec};
use capgame::verify::GridSpec;
use capgame::{Firm, Primitives, ValueKind};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything a run depends on. A run is a pure function of this value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: Option<Primitives>,
    /// Candidate value function for `value`, `verify` and `sweep`.
    pub value: Option<ValueKind>,
    /// One strategy used by both firms.
    pub strategy: Option<BoundaryKind>,
    /// Firm-specific strategies `[firm 1, firm 2]`; overrides `strategy`.
    pub strategies: Option<[BoundaryKind; 2]>,
    /// States `[x, q_i, q_mi]` for `value` and `sweep`; `[x, q1, q2]` for `simulate`.
    pub states: Option<Vec<[f64; 3]>>,
    pub outcome: Option<OutcomeSpec>,
    pub firm: Option<Firm>,
    pub mc: Option<McConfig>,
    pub grid: Option<GridConfig>,
    pub sweep: Option<SweepConfig>,
    /// Output file; `--out` takes precedence. Stdout when both are unset.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
}

impl McConfig {
    pub fn settings(&self) -> Result<McSettings, CliError> {
        Ok(McSettings {
            paths: self.paths.ok_or_else(|| missing("mc.paths"))?,
            dt: self.dt.ok_or_else(|| missing("mc.dt"))?,
            horizon: self.horizon.ok_or_else(|| missing("mc.horizon"))?,
            seed: self.seed.ok_or_else(|| missing("mc.seed"))?,
        })
    }
}

/// Partial grid override; unset fields keep the defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_x: Option<usize>,
    pub n_upper: Option<usize>,
    pub n_q: Option<usize>,
    pub x_lo: Option<f64>,
    pub x_upper: Option<f64>,
    pub q_lo: Option<f64>,
    pub q_hi: Option<f64>,
    pub fd_stride: Option<usize>,
}

impl GridConfig {
    pub fn spec(&self) -> GridSpec {
        let d = GridSpec::default();
        GridSpec {
            n_x: self.n_x.unwrap_or(d.n_x),
            n_upper: self.n_upper.unwrap_or(d.n_upper),
            n_q: self.n_q.unwrap_or(d.n_q),
            x_lo: self.x_lo.unwrap_or(d.x_lo),
            x_upper: self.x_upper.unwrap_or(d.x_upper),
            q_lo: self.q_lo.or(d.q_lo),
            q_hi: self.q_hi.or(d.q_hi),
            fd_stride: self.fd_stride.unwrap_or(d.fd_stride),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    R,
    Mu,
    Sigma,
    Gamma,
    /// The value function's own level: `p` for abs/inv, `c` for the dynamic kind.
    Level,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

pub fn missing(field: &str) -> CliError {
    CliError::Usage(format!("missing field `{field}`"))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        parse_json(&text, "config")
    }

    pub fn params(&self) -> Result<Primitives, CliError> {
        self.params.ok_or_else(|| missing("params"))
    }

    pub fn value_kind(&self) -> Result<ValueKind, CliError> {
        self.value.ok_or_else(|| missing("value"))
    }

    pub fn states(&self) -> Result<&[[f64; 3]], CliError> {
        match &self.states {
            Some(s) if !s.is_empty() => Ok(s),
            _ => Err(missing("states")),
        }
    }

    pub fn strategy_pair(&self) -> Result<[BoundaryKind; 2], CliError> {
        match (self.strategies, self.strategy) {
            (Some(pair), _) => Ok(pair),
            (None, Some(s)) => Ok([s, s]),
            (None, None) => Err(missing("strategy")),
        }
    }
}

pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid {what}: {e}")))
}

/// `x,q1,q2`.
pub fn parse_state(text: &str) -> Result<[f64; 3], CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "state must be x,q1,q2, got `{text}`"
        )));
    }
    let mut out = [0.0; 3];
    for (slot, p) in out.iter_mut().zip(parts) {
        *slot = p
            .parse()
            .map_err(|_| CliError::Usage(format!("not a number in state: `{p}`")))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_parsing() {
        assert_eq!(parse_state("1, 2.5,3").unwrap(), [1.0, 2.5, 3.0]);
        assert!(parse_state("1,2").is_err());
        assert!(parse_state("1,a,2").is_err());
    }

    #[test]
    fn full_config_round_trips() {
        let text = r#"{
            "params": {"r": 1, "mu": 0, "sigma": 1.4142135623730951, "gamma": 1.5},
            "value": {"kind": "c", "c": 0.5},
            "strategy": {"kind": "dynamic_c", "c": 0.5},
            "states": [[2.0, 1.0, 1.0]],
            "outcome": {"outcome": "symmetric"},
            "firm": "1",
            "mc": {"paths": 10, "dt": 0.01, "horizon": 1.0, "seed": 3},
            "grid": {"n_x": 5},
            "sweep": {"axis": "level", "values": [0, 0.5]},
            "out": "result.csv"
        }"#;
        let cfg: RunConfig = parse_json(text, "config").unwrap();
        assert_eq!(cfg.grid.unwrap().spec().n_x, 5);
        assert_eq!(
            cfg.strategy_pair().unwrap()[1],
            BoundaryKind::DynamicC { c: 0.5 }
        );
        let back: RunConfig = parse_json(&serde_json::to_string(&cfg).unwrap(), "config").unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(parse_json::<RunConfig>(r#"{"parms": {}}"#, "config").is_err());
    }
}
