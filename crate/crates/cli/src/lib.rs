//! Command-line front end: ground states, mass curves, normalized-solution
//! lookup, uniqueness and stability checks from a `key = value` run file.
//!
//! Exit codes: 0 success, 1 configuration, 2 numeric, 3 ambiguity,
//! 4 a requested check failed.

mod commands;
mod run_config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use nls_masscurve::{json, Error};
use serde_json::Value;

use commands::Outcome;
use run_config::{RunConfig, TRACE_KEYS};

#[derive(Parser)]
#[command(name = "nls-masscurve", version, about = "Radial ground states and mass curves on balls")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run file (`key = value` lines, `#` comments).
    config: PathBuf,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Extra `key=value` pairs overriding the run file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Ground state at one multiplier `lambda`.
    Solve(Common),
    /// Mass curve over `[lambda_min, lambda_max]`.
    Trace(Common),
    /// Multipliers with prescribed mass (`mass`, `mass_fraction`).
    Lookup(Common),
    /// Whole-space soliton mass by two independent routes.
    Qnorm(Common),
    /// Large-multiplier limits of the mass curve and convergence to the soliton.
    Limits(Common),
    /// Uniqueness conditions for the weight, or the family region table.
    Yanagida(Common),
    /// Slope-criterion stability at prescribed masses.
    Stability(Common),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Validation(_) | Error::Io(_) | Error::BelowFirstEigenvalue { .. } => 1,
        Error::Ambiguity { .. } => 3,
        Error::Domain(_) | Error::Numeric(_) | Error::Evaluation { .. } | Error::Integration { .. } => 2,
    }
}

type Handler = fn(&RunConfig) -> Result<Outcome, Error>;

fn run(command: Command) -> Result<Outcome, Error> {
    let (common, keys, f): (Common, Vec<&str>, Handler) = match command {
        Command::Solve(c) => (c, commands::SOLVE_KEYS.to_vec(), commands::solve),
        Command::Trace(c) => (c, commands::trace_keys(), commands::cmd_trace),
        Command::Lookup(c) => (c, [TRACE_KEYS, commands::MASS_KEYS].concat(), commands::cmd_lookup),
        Command::Qnorm(c) => (c, commands::Q_KEYS.to_vec(), commands::cmd_qnorm),
        Command::Limits(c) => (c, [TRACE_KEYS, commands::Q_KEYS, commands::LIMITS_KEYS].concat(), commands::cmd_limits),
        Command::Yanagida(c) => (c, commands::YANAGIDA_KEYS.to_vec(), commands::cmd_yanagida),
        Command::Stability(c) => {
            (c, [TRACE_KEYS, commands::MASS_KEYS, commands::STABILITY_KEYS].concat(), commands::cmd_stability)
        }
    };
    let cfg = RunConfig::load(&common.config, &common.overrides, &keys, common.out)?;
    f(&cfg)
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code. Errors go to stderr as one-line JSON records.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if outcome.checks_passed {
                0
            } else {
                eprintln!(
                    "{}",
                    serde_json::to_string(&json::object([("kind", Value::String("check_failed".into()))]))
                        .unwrap_or_default()
                );
                4
            }
        }
        Err(e) => {
            let record =
                json::object([("kind", Value::String(e.kind().into())), ("message", Value::String(e.to_string()))]);
            eprintln!("{}", serde_json::to_string(&record).unwrap_or_default());
            exit_code(&e)
        }
    }
}
