//! Command-line front end: configuration, subcommands and result files.

pub mod commands;
pub mod config;
pub mod output;
pub mod validate;

use crate::error::FluctError;
use clap::{Parser, Subcommand};
use config::{out_dir, Overrides, RunConfig};
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "levyfluct",
    version,
    about = "Fluctuation functions of Lévy processes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo paths.
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Renewal grid cells.
    #[arg(long, global = true)]
    pub grid_n: Option<usize>,
    #[arg(long, global = true)]
    pub xmax: Option<f64>,
    /// Solver tolerance used by `validate`.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Wiener-Hopf factors on the imaginary axis.
    Factors,
    /// Scale functions of a spectrally negative model.
    Scale,
    /// Closed-form fluctuation functions.
    ClosedForms,
    /// Fluctuation functions from the grid solver.
    Solve,
    /// Consistency checks against tolerances.
    Validate,
    /// Monte Carlo estimates.
    Mc,
    /// Exit transforms.
    ExitLaw,
}

/// Exit status: 0 on success, 1 on a failed check or runtime error, 2 on
/// a usage error.
pub fn run(cli: Cli) -> i32 {
    let mut cfg = match &cli.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => return report(&e),
        },
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        paths: cli.paths,
        grid_n: cli.grid_n,
        x_max: cli.xmax,
        tol: cli.tol,
    });
    let model = match cfg.validate() {
        Ok(m) => m,
        Err(e) => return report(&e),
    };
    let out = out_dir(cli.out);
    let result = match cli.command {
        Command::Factors => commands::cmd_factors(&model, &cfg, &out),
        Command::Scale => commands::cmd_scale(&model, &cfg, &out),
        Command::ClosedForms => commands::cmd_closed_forms(&model, &cfg, &out),
        Command::Solve => commands::cmd_solve(&model, &cfg, &out),
        Command::Validate => validate::cmd_validate(&model, &cfg, &out),
        Command::Mc => commands::cmd_mc(&model, &cfg, &out),
        Command::ExitLaw => commands::cmd_exit(&model, &cfg, &out),
    };
    match result {
        Ok(o) => {
            for f in &o.files {
                println!("{}", f.display());
            }
            for f in &o.failures {
                eprintln!("check failed: {f}");
            }
            i32::from(!o.failures.is_empty())
        }
        Err(e) => report(&e),
    }
}

fn report(e: &FluctError) -> i32 {
    match e {
        FluctError::InvalidInput(_) | FluctError::Unsupported(_) | FluctError::Json(_) => {
            eprintln!("usage error: {e}");
            2
        }
        _ => {
            eprintln!("error: {e}");
            1
        }
    }
}
