//! Command-line front end: argument parsing, dispatch and exit codes.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{ExperimentConfig, Overrides, RawConfig, SolverKind};
use crate::error::{CliError, Result};
use crate::experiments::{run_blocks, run_convergence, run_rates, write_blocks, write_convergence, write_rates};
use crate::report::write_json;
use crate::suite::{Status, Suite};

#[derive(Debug, Parser)]
#[command(name = "wiplab", version, about = "Rate formulas and Monte Carlo diagnostics for Birkhoff-sum paths of chaotic maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Tabulate exact rate exponents (no simulation).
    Rates,
    /// Path-space and marginal distances to Brownian motion across a grid of n.
    Convergence,
    /// Block-decomposition diagnostics across a grid of n.
    Blocks,
    /// Run the property suite and write a pass/fail manifest.
    Check,
}

#[derive(Clone, Debug, Default, Args)]
pub struct Flags {
    /// TOML experiment configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub solver: Option<SolverKind>,
    /// Sinkhorn regularisation, relative to the median cost.
    #[arg(long, global = true, value_name = "REAL")]
    pub eps: Option<f64>,
    /// Ensemble size.
    #[arg(long, global = true, value_name = "INT")]
    pub m: Option<usize>,
}

impl Flags {
    pub fn overrides(&self) -> Overrides {
        Overrides { seed: self.seed, out: self.out.clone(), solver: self.solver, eps: self.eps, m: self.m }
    }

    pub fn load(&self) -> Result<ExperimentConfig> {
        let raw = match &self.config {
            Some(path) => RawConfig::load(path)?,
            None => RawConfig::default(),
        };
        raw.apply(&self.overrides()).validate()
    }
}

#[derive(Serialize)]
struct Runtime {
    seconds: f64,
    budget_seconds: f64,
    within_budget: bool,
}

fn run_check(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let (manifest, elapsed) = Suite::from_config(cfg).run();
    fs::create_dir_all(out)?;
    write_json(&out.join("check.json"), &manifest)?;
    let seconds = elapsed.as_secs_f64();
    let within_budget = seconds <= cfg.check_seconds;
    write_json(&out.join("check_runtime.json"), &Runtime { seconds, budget_seconds: cfg.check_seconds, within_budget })?;
    for c in &manifest.checks {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Info => "INFO",
        };
        println!("{tag} {:<28} {}", c.id, c.summary);
    }
    println!(
        "{} passed, {} failed, {} info in {seconds:.1} s (budget {} s)",
        manifest.passed, manifest.failed, manifest.info, cfg.check_seconds
    );
    let failed = manifest.failed + usize::from(!within_budget);
    if failed > 0 {
        return Err(CliError::PropertyFailure { failed });
    }
    Ok(())
}

/// Runs one subcommand against a validated configuration.
pub fn execute(command: Command, cfg: &ExperimentConfig) -> Result<()> {
    let out = cfg.out.as_path();
    match command {
        Command::Rates => write_rates(&run_rates(cfg)?, out)?,
        Command::Convergence => write_convergence(&run_convergence(cfg)?, out)?,
        Command::Blocks => write_blocks(&run_blocks(cfg)?, out)?,
        Command::Check => run_check(cfg, out)?,
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match cli.flags.load().and_then(|cfg| execute(cli.command, &cfg)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
