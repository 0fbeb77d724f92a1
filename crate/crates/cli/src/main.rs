//! `eit`: command line driver for forward solves, simulation, posterior
//! sampling and the frequentist experiments.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "eit", version, about = "Statistical Calderón problem on the unit disk")]
pub struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true, default_value = "config.json")]
    pub config: PathBuf,

    /// Worker threads for replicate-level parallelism.
    #[arg(long, global = true, env = "EIT_JOBS")]
    pub jobs: Option<usize>,

    /// Overrides `out_dir` from the configuration.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,

    /// Exit with code 4 if the run misses its acceptance threshold.
    #[arg(long, global = true)]
    pub check: bool,

    /// Forward solver: the full FEM reference path or the condensed fast path.
    #[arg(long, global = true, value_enum, default_value_t = Solver::Condensed)]
    pub solver: Solver,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Solver {
    Fem,
    Condensed,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the measurement matrix, optionally its sensitivity tensor.
    Forward {
        /// Comma-separated conductivities; defaults to `model.theta0`.
        #[arg(long, value_delimiter = ',')]
        theta: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        sensitivity: Option<PathBuf>,
        /// Dump the assembled stiffness matrix as COO triplets.
        #[arg(long)]
        stiffness: Option<PathBuf>,
        /// Also write vertices.csv and triangles.csv into the output directory.
        #[arg(long)]
        export_mesh: bool,
    },
    /// Draw observations at `model.theta0`.
    Simulate {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the posterior for a dataset.
    Mcmc {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        burnin: Option<usize>,
        #[arg(long)]
        thin: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bernstein-von Mises diagnostics on one simulated dataset.
    Bvm {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Frequentist coverage of credible balls.
    Coverage {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Posterior contraction over `experiment.N_grid`.
    Rate {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random-pair injectivity and stability probe.
    Stability {
        #[arg(long, default_value_t = 100)]
        pairs: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the electrode gap statistic and run a 20-pair injectivity probe.
    Delta,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json_line());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

pub(crate) fn configure_threads(jobs: Option<usize>) -> Result<(), CliError> {
    if let Some(jobs) = jobs {
        if jobs == 0 {
            return Err(CliError::Config { message: "--jobs must be >= 1".into() });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config { message: format!("--jobs: {e}") })?;
    }
    Ok(())
}
