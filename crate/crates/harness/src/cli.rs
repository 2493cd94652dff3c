//! `ecx run|compare|verify|sweep --config <path> --out <dir> [--seed <u64>] [--record-ghost]`
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 verification
//! failure, 3 unexpected divergence.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::experiments::{self, run_variant};
use crate::metrics::write_csv;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ecx", version, about = "Error-compensated compression simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Experiment config (TOML). Optional for `verify`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Track the ghost sequence and fill the ghost_residual_norm column.
    #[arg(long)]
    pub record_ghost: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the base configuration once.
    Run(Common),
    /// Run every variant (after optional learning-rate tuning).
    Compare(Common),
    /// Run the oracle suite.
    Verify(Common),
    /// Grid over learning rate and alpha (or c0).
    Sweep(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Run(c) | Command::Compare(c) | Command::Verify(c) | Command::Sweep(c) => c,
        }
    }
}

fn load(common: &Common) -> anyhow::Result<ExperimentConfig> {
    let path = common.config.as_ref().context("--config is required")?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    if common.record_ghost {
        cfg.base.record.ghost = true;
    }
    Ok(cfg)
}

enum Failure {
    Usage(anyhow::Error),
    Verify,
    Diverged,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.into())
    }
}

fn execute(command: &Command) -> Result<(), Failure> {
    let common = command.common();
    match command {
        Command::Run(_) => {
            let cfg = load(common)?;
            let problem = ecx_core::Problem::build(&cfg.base.problem)?;
            let outcome = run_variant(&cfg.name, cfg.base.clone(), &problem)?;
            fs::create_dir_all(&common.out)?;
            let file = fs::File::create(common.out.join(format!("{}.csv", cfg.name)))?;
            write_csv(&outcome.trace, std::io::BufWriter::new(file))?;
            println!("steps = {}", outcome.trace.t_effective);
            println!("final_grad_norm_sq = {}", crate::metrics::fmt17(outcome.trace.final_grad_norm_sq));
            if let Some((step, reason)) = &outcome.divergence {
                println!("divergence = step {step}: {reason}");
                if !outcome.expected_divergence() {
                    return Err(Failure::Diverged);
                }
            }
        }
        Command::Compare(_) => {
            let cfg = load(common)?;
            let summary = experiments::compare(&cfg)?;
            experiments::write_outputs(&summary, &common.out)?;
            print!("{}", summary.render());
            if summary.unexpected_divergence() {
                return Err(Failure::Diverged);
            }
        }
        Command::Verify(_) => {
            let seed = match (&common.config, common.seed) {
                (_, Some(s)) => s,
                (Some(_), None) => load(common)?.base.seed,
                (None, None) => 1,
            };
            let report = experiments::verify_suite(seed)?;
            let text = report.render();
            fs::create_dir_all(&common.out)?;
            fs::write(common.out.join("verify.txt"), &text)?;
            print!("{text}");
            if !report.passed() {
                return Err(Failure::Verify);
            }
        }
        Command::Sweep(_) => {
            let cfg = load(common)?;
            let cells = experiments::sweep(&cfg)?;
            experiments::write_sweep(&cells, &common.out)?;
            println!("cells = {}", cells.len());
            if cells
                .iter()
                .any(|c| c.outcome.divergence.is_some() && !c.outcome.expected_divergence())
            {
                return Err(Failure::Diverged);
            }
        }
    }
    Ok(())
}

/// Parse `args` and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
        Err(Failure::Verify) => EXIT_VERIFY,
        Err(Failure::Diverged) => EXIT_DIVERGED,
    }
}
