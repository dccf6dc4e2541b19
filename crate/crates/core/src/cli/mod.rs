//! The `anisofrac` command line.
//!
//! Exit status: 0 on success, 2 when the config or its parameters are
//! invalid, 3 when a solver stops before converging, 1 otherwise.

pub mod config;
pub mod run;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::{parse_config, ConfigError, ExperimentConfig, Task};
pub use run::{execute, write_atomic, Artifact};

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(name = "anisofrac", version, about = "Anisotropic fractional energies, their s-limits and 1D homogenization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (TOML). Without it every key takes its default.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// CSV destination; overrides `output.path`. Without either, CSV goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, env = "ANISOFRAC_THREADS")]
    pub threads: Option<usize>,
    /// Seed for randomized audits; overrides `params.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Fractional energy of u as a CSV row.
    Energy {
        /// Add the near-diagonal, bulk and tail columns.
        #[arg(long)]
        breakdown: bool,
    },
    /// (1-s) x double integral as s -> 1 against the local limit.
    BbmSweep,
    /// s x double integral as s -> 0 against the weighted L^p limit.
    MsSweep,
    /// Minimizer of the nonlocal energy minus ∫ f v.
    SolveNonlocal,
    /// Minimizer of the local limit problem.
    SolveLocal,
    /// Distances between nonlocal and local minimizers as s -> 1.
    Localize,
    /// Effective coefficients of a periodic 1D kernel.
    Homogenize,
    /// Both iterated limits of the periodic problem.
    Commute,
    /// Randomized audit of the kernel hypotheses.
    VerifyKernel,
}

impl Command {
    pub fn task(self) -> Task {
        match self {
            Command::Energy { .. } => Task::Energy,
            Command::BbmSweep => Task::BbmSweep,
            Command::MsSweep => Task::MsSweep,
            Command::SolveNonlocal => Task::SolveNonlocal,
            Command::SolveLocal => Task::SolveLocal,
            Command::Localize => Task::Localize,
            Command::Homogenize => Task::Homogenize,
            Command::Commute => Task::Commute,
            Command::VerifyKernel => Task::VerifyKernel,
        }
    }
}

/// Exit status for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotConverged { .. } => 3,
        Error::Io(_) | Error::LinearSolve(_) => 1,
        _ => 2,
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, (i32, Vec<String>)> {
    let task = cli.command.task();
    let (text, base) = match &cli.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => (t, path.parent().map(Path::to_path_buf).unwrap_or_default()),
            Err(e) => return Err((2, vec![format!("cannot read {}: {e}", path.display())])),
        },
        None => (String::new(), PathBuf::new()),
    };
    let mut cfg = parse_config(&text, task, &base).map_err(|errs| (2, errs.iter().map(|e| e.to_string()).collect()))?;
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Command::Energy { breakdown: true } = cli.command {
        cfg.breakdown = true;
    }
    Ok(cfg)
}

fn run_cli(cli: &Cli) -> i32 {
    let cfg = match load(cli) {
        Ok(c) => c,
        Err((code, msgs)) => {
            for m in msgs {
                eprintln!("error: {m}");
            }
            return code;
        }
    };
    let art = match execute(&cfg) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    match &cfg.output {
        Some(path) => {
            if let Err(e) = write_atomic(path, &art.csv) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return 1;
            }
            println!("{}", art.summary);
        }
        None => {
            print!("{}", art.csv);
            eprintln!("{}", art.summary);
        }
    }
    if art.converged {
        0
    } else {
        3
    }
}

/// Parses `args` (program name first) and runs; returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli.threads {
        Some(0) => {
            eprintln!("error: --threads must be at least 1");
            2
        }
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            Ok(pool) => pool.install(|| run_cli(&cli)),
            Err(e) => {
                eprintln!("error: cannot start {t} threads: {e}");
                1
            }
        },
        None => run_cli(&cli),
    }
}
