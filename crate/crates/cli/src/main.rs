//! `nexcp`: simulation and real-data experiment driver, bound calculators,
//! and a diagnostics self-check, all emitting deterministic CSV.

mod commands;
mod output;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "nexcp", version, about = "Weighted conformal prediction under distribution shift")]
struct Cli {
    /// Worker threads for trial-level parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the simulated sequential benchmark (Settings 1-3).
    Simulate(SimulateArgs),
    /// Run the sequential benchmark on the ELEC2 electricity data.
    Elec2(Elec2Args),
    /// Evaluate coverage-gap bound calculators.
    Bounds(BoundsArgs),
    /// Run the statistical property self-checks.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Simulation setting: 1 (i.i.d.), 2 (changepoints), 3 (drift).
    #[arg(long, default_value_t = 1)]
    setting: u8,
    /// Series length per trial.
    #[arg(long, default_value_t = 2000)]
    horizon: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.99)]
    rho: f64,
    #[arg(long = "burn-in", default_value_t = 100)]
    burn_in: usize,
    #[arg(long = "grid-points", default_value_t = 1000)]
    grid_points: usize,
    /// Rolling-average window for rolling.csv.
    #[arg(long, default_value_t = 10)]
    window: usize,
    /// Disable the two-fit linear membership path (forces per-candidate
    /// refits on the grid).
    #[arg(long = "no-fast-path")]
    no_fast_path: bool,
    /// Output directory for results.csv, summary.csv, rolling.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Elec2Args {
    /// Path to the ELEC2 CSV; defaults to an `elec2.csv` (or
    /// `electricity-normalized.csv`) under $NEXCP_DATA_DIR.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Evaluate the permuted control series instead of the original order.
    #[arg(long)]
    permute: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 0.99)]
    rho: f64,
    #[arg(long = "burn-in", default_value_t = 100)]
    burn_in: usize,
    #[arg(long = "grid-points", default_value_t = 1000)]
    grid_points: usize,
    #[arg(long, default_value_t = 300)]
    window: usize,
    /// Half-hour slots to keep, 1-based (default 19-24, i.e. 9:00-12:00).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    slots: Option<Vec<usize>>,
    /// Keep the initial constant-transfer prefix instead of dropping it.
    #[arg(long = "keep-prefix")]
    keep_prefix: bool,
    #[arg(long = "no-fast-path")]
    no_fast_path: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[command(subcommand)]
    which: BoundsCommand,
}

#[derive(Debug, Subcommand)]
enum BoundsCommand {
    /// Coverage-gap bound under bounded distribution drift.
    Drift {
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        n: usize,
    },
    /// Coverage-gap bound a given number of steps after a changepoint.
    Changepoint {
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
    },
    /// Miscoverage bound under contamination.
    Huber {
        #[arg(long)]
        alpha: f64,
        /// Contamination fraction applied to every training point.
        #[arg(long)]
        eps: f64,
        /// Weight decay; omit for uniform weights.
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// 1 for split/full conformal, 2 for jackknife+.
        #[arg(long, default_value_t = 1)]
        factor: u8,
    },
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    /// Random cases per property suite.
    #[arg(long, default_value_t = 10_000)]
    fuzz: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Elec2(args) => commands::elec2(args),
        Command::Bounds(args) => commands::bounds(args),
        Command::Diagnose(args) => commands::diagnose(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
