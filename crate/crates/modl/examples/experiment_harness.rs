//! The config-driven harness end to end: write a TOML config, validate it,
//! run the experiment, and print the report — the same path as the `modl`
//! binary's `validate`, `run`, and `report` subcommands.
//!
//! ```bash
//! cargo run -p modl --example experiment_harness
//! ```

use modl::config::ExperimentConfig;
use modl::runner;

fn main() -> modl::Result<()> {
    let toml_text = r#"
workers = 0

[dataset]
kind = "synthetic"
n_samples = 900
feature_dim = 12
classes = 3
flip_rate = 0.2
uncertain_fraction = 0.15
split = [0.35, 0.15, 0.5]
split_seed = 11
seed = 7

[train]
epochs = 5
k = 5

[eval]
seeds = [0]
k_sweep = [3, 5]
"#;
    let dir = tempfile::tempdir().map_err(modl::Error::Io)?;
    let config_path = dir.path().join("experiment.toml");
    std::fs::write(&config_path, toml_text)?;

    let config = ExperimentConfig::from_path(&config_path)?;
    config.validate()?;
    println!("config valid: {}", config_path.display());

    let out = dir.path().join("out");
    let summary = runner::run(&config, &out)?;
    println!(
        "run finished: {} seed(s); stage-1 checkpoints cached under {}",
        summary.seeds.len(),
        out.join("cache").display()
    );
    runner::sweep_k(&config, &out)?;

    println!("\n{}", runner::report(&out)?);

    // Re-running reuses every stage-1 artifact by content hash.
    runner::run(&config, &out)?;
    println!("second run reused the stage-1 cache (see the log lines above)");
    Ok(())
}
