//! Command-line front end. Every run writes a JSON result carrying the
//! effective configuration, so feeding that file back through `--config`
//! reproduces it.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{Estimates, Session};
pub use config::{parse_config, EstimateCfg, EvolveCfg, RunConfig, SdeBlock, StepperCfg};
pub use output::{Emitter, Metadata};

use crate::error::{Error, Result};

const DEFAULTS: &str = "\
Without --config every setting takes its default: potential K (1 + |x|^2), \
kappa = 0, D = 1, a 128 x 128 x 64 grid, output directory laydown-out. \
Exit codes: 0 success, 1 config or io error, 2 violated precondition or \
infeasible constants, 3 non-convergence or numerical failure.";

#[derive(Debug, Parser)]
#[command(name = "laydown", version, about = "Fibre lay-down on a moving belt", after_help = DEFAULTS)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config, or a JSON result file from an earlier run.
    #[arg(long, global = true, env = "LAYDOWN_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "LAYDOWN_OUT")]
    out: Option<PathBuf>,

    #[arg(long, global = true, env = "LAYDOWN_SEED")]
    seed: Option<u64>,

    /// Worker threads; all available cores when absent.
    #[arg(long, global = true, env = "LAYDOWN_THREADS")]
    threads: Option<usize>,

    /// Stationary residual tolerance.
    #[arg(long, global = true, env = "LAYDOWN_TOL")]
    tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Check the potential hypotheses on sampled circles.
    CheckPotential,
    /// Lambda, C_V and the hypocoercivity constant chain.
    Constants,
    /// Lyapunov weight parameters and the sampled inequality margin.
    VerifyWeight,
    /// Stationary state of the kinetic equation.
    Stationary,
    /// Evolve a random initial datum and record the entropy diagnostics.
    Evolve,
    /// Measure the exponential decay rate towards the stationary state.
    Decay,
    /// Simulate the particle SDE.
    Sde,
    /// All of the above, with the SDE compared against the stationary state.
    FullReport,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::CheckPotential => "check-potential",
            Command::Constants => "constants",
            Command::VerifyWeight => "verify-weight",
            Command::Stationary => "stationary",
            Command::Evolve => "evolve",
            Command::Decay => "decay",
            Command::Sde => "sde",
            Command::FullReport => "full-report",
        }
    }
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => parse_config(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.output = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.tol {
        cfg.stationary.tol = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli, threads: usize) -> Result<()> {
    let cfg = effective_config(cli)?;
    let mut s = Session::new(cfg, cli.command.name(), threads)?;
    let deferred = match cli.command {
        Command::CheckPotential => s.check_potential().map(|_| None),
        Command::Constants => s.constants().map(|_| None),
        Command::VerifyWeight => s.verify_weight().map(|_| None),
        Command::Stationary => s.stationary().map(|_| None),
        Command::Evolve => s.evolve().map(|_| None),
        Command::Decay => s.decay().map(|_| None),
        Command::Sde => s.sde().map(|_| None),
        Command::FullReport => s.full_report().map(|(_, e)| e),
    }?;
    for p in s.out.written() {
        println!("{}", p.display());
    }
    deferred.map_or(Ok(()), Err)
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = cli.threads.unwrap_or_else(rayon::current_num_threads);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("laydown: {}", Error::Config(format!("cannot start {threads} threads: {e}")));
            return 1;
        }
    };
    match pool.install(|| execute(&cli, threads)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("laydown: {e}");
            if let Error::NonConvergence { history, .. } = &e {
                if let Some(last) = history.last() {
                    eprintln!("laydown: {} iterations, last residual {last:.3e}", history.len());
                }
            }
            e.exit_code()
        }
    }
}
