//! `qudit`: synthesize SWAP pulses, evaluate their sensitivity to spectator
//! shifts, and run heatmap or scaling sweeps.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "qudit",
    version,
    about = "Qudit SWAP synthesis and spectator crosstalk sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Overrides shared by the commands that read a run config.
#[derive(clap::Args, Debug, Clone)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long, env = "QUDIT_OUT")]
    pub out: Option<PathBuf>,
    /// Optimizer seed (overrides `seed`).
    #[arg(long, env = "QUDIT_SEED")]
    pub seed: Option<u64>,
    /// Worker threads for sweeps (overrides `workers`).
    #[arg(long, env = "QUDIT_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Heatmap,
    Scaling,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize one pulse per configured gate.
    Synthesize {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Simulated and predicted infidelity of a pulse at one shift, as JSON.
    Evaluate {
        /// Pulse JSON written by `synthesize`.
        #[arg(long)]
        pulse: PathBuf,
        /// Shift in units of the self-Kerr. Negative values are allowed.
        #[arg(long, allow_hyphen_values = true)]
        eps_over_xi: f64,
        /// Config the pulse must match; also supplies propagation settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Heatmap or scaling sweep; writes CSV plus a JSON sidecar.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        kind: Kind,
    },
    /// Re-fit slopes from an existing scaling CSV.
    Slope {
        /// Scaling CSV written by `sweep --kind scaling`.
        #[arg(long = "in")]
        input: PathBuf,
        /// Fit window in eps/xi; defaults to the standard window.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
        window: Option<Vec<f64>>,
    },
    /// Print the benchmark configuration as TOML.
    Defaults,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Synthesize { run } => commands::synthesize(&run),
        Command::Evaluate {
            pulse,
            eps_over_xi,
            config,
        } => commands::evaluate(&pulse, eps_over_xi, config.as_deref()),
        Command::Sweep { run, kind } => commands::sweep(&run, kind),
        Command::Slope { input, window } => commands::slope(&input, window.map(|w| (w[0], w[1]))),
        Command::Defaults => commands::defaults(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
