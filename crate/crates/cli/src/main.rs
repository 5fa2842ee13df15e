//! `capgame`: derive constants, evaluate and verify candidate value
//! functions, simulate payoffs and sweep parameters from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] capgame::Error),
    #[error("{0}")]
    Io(String),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use capgame::Error as E;
        match self {
            CliError::Usage(_) => 64,
            CliError::Io(_) => 74,
            CliError::VerificationFailed(_) => 1,
            CliError::Model(E::QuadratureNotConverged { .. } | E::TooCloseToBoundary { .. }) => 3,
            CliError::Model(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "capgame",
    version,
    about = "Capacity investment game under demand uncertainty"
)]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the derived constants.
    Derive(Common),
    /// Evaluate a value function and its partials at states.
    Value(Common),
    /// Check the equilibrium conditions on a grid.
    Verify(Common),
    /// Monte Carlo payoff of one firm.
    Simulate(SimArgs),
    /// Values over a list of parameter or level values, as CSV.
    Sweep(Common),
}

#[derive(Debug, Args, Default)]
struct Common {
    /// Primitives as JSON, e.g. '{"r":1,"mu":0,"sigma":1.4,"gamma":1.5}'.
    #[arg(long)]
    params: Option<String>,
    /// Value function as JSON, e.g. '{"kind":"c","c":0.5}'.
    #[arg(long)]
    value: Option<String>,
    /// `x,q_i,q_mi`; repeatable.
    #[arg(long)]
    state: Vec<String>,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    /// Strategy used by both firms, e.g. '{"kind":"constant_price","p":2.6}'.
    #[arg(long)]
    strategy: Option<String>,
    /// Outcome construction, e.g. '{"outcome":"symmetric"}'.
    #[arg(long)]
    outcome: Option<String>,
    /// Firm whose payoff is reported (1 or 2).
    #[arg(long)]
    firm: Option<String>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn merge_common(cfg: &mut RunConfig, c: &Common) -> Result<(), CliError> {
    if let Some(p) = &c.params {
        cfg.params = Some(config::parse_json(p, "--params")?);
    }
    if let Some(v) = &c.value {
        cfg.value = Some(config::parse_json(v, "--value")?);
    }
    if !c.state.is_empty() {
        cfg.states = Some(
            c.state
                .iter()
                .map(|s| config::parse_state(s))
                .collect::<Result<_, _>>()?,
        );
    }
    Ok(())
}

fn merge_sim(cfg: &mut RunConfig, a: &SimArgs) -> Result<(), CliError> {
    merge_common(cfg, &a.common)?;
    if let Some(s) = &a.strategy {
        cfg.strategy = Some(config::parse_json(s, "--strategy")?);
        cfg.strategies = None;
    }
    if let Some(o) = &a.outcome {
        cfg.outcome = Some(config::parse_json(o, "--outcome")?);
    }
    if let Some(f) = &a.firm {
        cfg.firm = Some(config::parse_json(&format!("\"{f}\""), "--firm")?);
    }
    let mc = cfg.mc.get_or_insert_with(Default::default);
    mc.paths = a.paths.or(mc.paths);
    mc.dt = a.dt.or(mc.dt);
    mc.horizon = a.horizon.or(mc.horizon);
    mc.seed = a.seed.or(mc.seed);
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot set thread count: {e}")))?;
    }
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.out.is_some() {
        cfg.out = cli.out.clone();
    }
    let output = match &cli.command {
        Command::Derive(c) => {
            merge_common(&mut cfg, c)?;
            commands::derive(&cfg)?
        }
        Command::Value(c) => {
            merge_common(&mut cfg, c)?;
            commands::value(&cfg)?
        }
        Command::Verify(c) => {
            merge_common(&mut cfg, c)?;
            let (text, failing) = commands::verify(&cfg)?;
            emit(&cfg, &text)?;
            return match failing.is_empty() {
                true => Ok(()),
                false => Err(CliError::VerificationFailed(failing.join(", "))),
            };
        }
        Command::Simulate(a) => {
            merge_sim(&mut cfg, a)?;
            commands::simulate(&cfg)?
        }
        Command::Sweep(c) => {
            merge_common(&mut cfg, c)?;
            commands::sweep(&cfg)?
        }
    };
    emit(&cfg, &output)
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("capgame: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
