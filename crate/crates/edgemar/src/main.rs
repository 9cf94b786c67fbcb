use std::path::PathBuf;

use clap::{Parser, Subcommand};
use edgemar::commands::{cmd_generate, cmd_solve, cmd_sweep, cmd_timing, cmd_train};
use edgemar::{AppError, Config};

#[derive(Parser)]
#[command(
    name = "edgemar",
    version,
    about = "Mobility-aware MAR placement benchmark: exact solver, learned placements, baseline heuristics"
)]
struct Cli {
    /// Run configuration (JSON).
    #[arg(long, value_name = "PATH", global = true)]
    config: Option<PathBuf>,
    /// Output directory; created if missing.
    #[arg(long, value_name = "DIR", env = "EDGEMAR_OUT", global = true)]
    out: Option<PathBuf>,
    /// Overrides the config master seed.
    #[arg(long, value_name = "N", global = true)]
    seed: Option<u64>,
    /// Sweep worker threads.
    #[arg(long, value_name = "K", global = true, default_value_t = 1)]
    parallel: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the topology and the first scenario's requests
    Generate,
    /// Run one placement scheme on the first scenario; write plans and a manifest
    Solve {
        #[arg(long, value_name = "NAME")]
        scheme: String,
    },
    /// Train the classifier; write a checkpoint and the per-epoch trace
    Train {
        /// Optional route-plan JSONL to train from instead of solving in-process.
        #[arg(long, value_name = "PATH")]
        dataset: Option<PathBuf>,
    },
    /// Sweep one parameter axis and write the results CSV
    Sweep {
        #[arg(long, value_name = "NAME")]
        axis: String,
        /// Keep wall-clock columns instead of zeroing them.
        #[arg(long)]
        timings: bool,
    },
    /// Measure phase wall times over repeated runs
    Timing,
}

fn run(cli: Cli) -> Result<(), AppError> {
    let config_path = cli
        .config
        .ok_or_else(|| AppError::Usage("--config PATH is required".to_string()))?;
    let mut cfg = Config::load(&config_path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out).map_err(AppError::io(&out))?;

    let summary = match cli.command {
        Command::Generate => cmd_generate(&cfg, &out)?,
        Command::Solve { scheme } => cmd_solve(&cfg, &out, &scheme)?,
        Command::Train { dataset } => cmd_train(&cfg, &out, dataset.as_deref())?,
        Command::Sweep { axis, timings } => cmd_sweep(&cfg, &out, &axis, cli.parallel, timings)?,
        Command::Timing => cmd_timing(&cfg, &out)?,
    };
    println!("{summary}");
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code());
    }
}
