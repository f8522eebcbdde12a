//! Thin CLI over the experiment harness. The library (and its examples/)
//! is the primary interface; this binary just wires the config file to
//! `runner::{run, sweep_k, report}` plus schema validation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use modl::config::ExperimentConfig;
use modl::runner;

#[derive(Parser)]
#[command(name = "modl", version, about = "Many-to-one distribution learning experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config file: schema plus cross-field constraints, no compute.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the configured experiment: stage 1 (cached), distillation,
    /// every arm over every seed, and the aggregate CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated seed list; overrides `eval.seeds`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Worker threads (0 = one per CPU); overrides `workers`.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Sweep the neighbor count K, reusing cached stage-1 artifacts.
    SweepK {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the ablation table, K sweep, and ensemble comparison for a
    /// populated output directory.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(
    path: &Path,
    out: Option<PathBuf>,
    seeds: Option<Vec<u64>>,
    workers: Option<usize>,
) -> Result<(ExperimentConfig, PathBuf), modl::Error> {
    let mut config = ExperimentConfig::from_path(path)?;
    if let Some(seeds) = seeds {
        config.eval.seeds = seeds;
    }
    if let Some(workers) = workers {
        config.workers = workers;
    }
    let out_dir = out
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| modl::Error::config("output_dir", "set it in the config or pass --out"))?;
    Ok((config, out_dir))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config } => ExperimentConfig::from_path(&config)
            .and_then(|c| c.validate())
            .map(|()| println!("ok: {} is valid", config.display())),
        Command::Run { config, out, seeds, workers } => {
            load_config(&config, out, seeds, workers).and_then(|(config, out_dir)| {
                let summary = runner::run(&config, &out_dir)?;
                println!(
                    "run complete: {} seeds, artifacts in {}",
                    summary.seeds.len(),
                    summary.out_dir.display()
                );
                print!("{}", runner::report(&out_dir)?);
                Ok(())
            })
        }
        Command::SweepK { config, out, seeds, workers } => {
            load_config(&config, out, seeds, workers).and_then(|(config, out_dir)| {
                let rows = runner::sweep_k(&config, &out_dir)?;
                println!("k,mean_improvement");
                for row in rows {
                    println!("{},{:.6}", row.k, row.mean_improvement);
                }
                Ok(())
            })
        }
        Command::Report { out } => runner::report(&out).map(|text| print!("{text}")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
