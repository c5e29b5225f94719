//! Command-line front end: experiment subcommands writing CSV and Markdown tables.

pub mod commands;
pub mod config;
pub mod format;

use clap::{Parser, Subcommand};

use crate::config::{CflArg, Defaults, Flags};

#[derive(Parser, Debug)]
#[command(name = "divfree", version, about = "Exactly divergence-free DG experiments on the unit square")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// One manufactured-solution run with per-step diagnostics
    SingleRun(Flags),
    /// Errors and observed rates over a list of meshes
    Convergence(Flags),
    /// Maximum stable time step per mesh and the exponent α
    CflSweep(Flags),
    /// Explicit RK against semi-implicit CN over a list of time steps
    CompareCn(Flags),
}

pub const EXIT_USAGE: i32 = 1;

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn main_with<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::SingleRun(f) => f
            .resolve(&Defaults {
                n_list: &[8],
                cfl: CflArg::Fourthirds,
            })
            .and_then(|c| commands::single_run(&c)),
        Command::Convergence(f) => f
            .resolve(&Defaults {
                n_list: &[8, 16, 32, 64],
                cfl: CflArg::Fourthirds,
            })
            .and_then(|c| commands::convergence(&c)),
        Command::CflSweep(f) => f
            .resolve(&Defaults {
                n_list: &[10, 20, 40, 80],
                cfl: CflArg::Search,
            })
            .and_then(|c| commands::cfl_sweep_cmd(&c)),
        Command::CompareCn(f) => f
            .resolve(&Defaults {
                n_list: &[8],
                cfl: CflArg::Fourthirds,
            })
            .and_then(|c| commands::compare_cn(&c)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}
