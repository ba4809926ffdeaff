//! Command-line front end: configuration, dispatch and artifact emission.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
pub mod verify;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::SimKind;
use config::{Overrides, RunConfig};
use error::CliError;
use report::Emitter;

#[derive(Debug, Parser)]
#[command(name = "parisi", version, about = "Zero-temperature Parisi computations and exact finite-N checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML file with run settings
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "K")]
    threads: Option<usize>,
    /// repeatable KEY=VAL config override
    #[arg(long = "override", global = true, value_name = "KEY=VAL")]
    overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the Parisi PDE for a given gamma and dump every layer
    SolvePde,
    /// Minimize the Parisi functional at one field strength
    Minimize,
    /// Minimize over the h grid and tabulate M, M', E, q_h
    ScanH,
    /// Overlap fixed points q_{t,h} over the t grid
    FixedPoint,
    /// Coupled-replica certificates over a q grid
    GtBound,
    /// Exact finite-N experiments
    Simulate {
        #[command(subcommand)]
        kind: Sim,
    },
    /// Run the invariant suite of every module
    Verify,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Sim {
    Chaos,
    Peaks,
    Variance,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SolvePde => "solve-pde",
            Command::Minimize => "minimize",
            Command::ScanH => "scan-h",
            Command::FixedPoint => "fixed-point",
            Command::GtBound => "gt-bound",
            Command::Simulate { kind: Sim::Chaos } => "simulate-chaos",
            Command::Simulate { kind: Sim::Peaks } => "simulate-peaks",
            Command::Simulate { kind: Sim::Variance } => "simulate-variance",
            Command::Verify => "verify",
        }
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let flags = Overrides {
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        threads: cli.threads,
        pairs: cli.overrides,
    };
    let config = RunConfig::load(&flags)?;
    dispatch(&config, cli.command.name())
}

/// Progress lines; a closed pipe (`parisi ... | head`) must not abort the run.
fn say(line: std::fmt::Arguments) {
    let _ = writeln!(std::io::stdout(), "{line}");
}

/// Runs a named command for every configured seed and writes its artifacts.
pub fn dispatch(config: &RunConfig, command: &str) -> Result<(), CliError> {
    let mut emit = Emitter::new(&config.out, command, &config.mixture, config);
    let mut summaries = Vec::new();
    let mut failed_checks = Vec::new();
    for &seed in &config.seeds {
        let summary = match command {
            "solve-pde" => commands::solve_pde(config, seed, &mut emit)?,
            "minimize" => commands::minimize_cmd(config, seed, &mut emit)?,
            "scan-h" => commands::scan_h(config, seed, &mut emit)?,
            "fixed-point" => commands::fixed_point(config, seed, &mut emit)?,
            "gt-bound" => commands::gt_bound(config, seed, &mut emit)?,
            "simulate-chaos" => commands::simulate(config, SimKind::Chaos, seed, &mut emit)?,
            "simulate-peaks" => commands::simulate(config, SimKind::Peaks, seed, &mut emit)?,
            "simulate-variance" => commands::simulate(config, SimKind::Variance, seed, &mut emit)?,
            "verify" => {
                let rows = verify::run_checks(config, seed)?;
                for row in rows.iter().filter(|r| !r.passed) {
                    failed_checks.push(format!("{} (seed {seed}: {:?} > {})", row.check, row.value, row.tolerance));
                }
                emit.csv(seed, &rows);
                let passed = rows.iter().filter(|r| r.passed).count();
                let summary = json!({ "checks": rows.len(), "passed": passed, "rows": rows });
                emit.json(seed, &summary);
                json!({ "checks": rows.len(), "passed": passed })
            }
            other => return Err(CliError::Config(format!("unknown command {other:?}"))),
        };
        say(format_args!("{command} seed {seed}: {summary}"));
        summaries.push((seed, summary));
    }
    if summaries.len() > 1 {
        emit.merged(&commands::merge(&summaries), summaries[0].0);
    }
    for path in emit.finish()? {
        say(format_args!("wrote {}", path.display()));
    }
    if failed_checks.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verify(failed_checks.join("; ")))
    }
}
