//! Sweep the neighbor count K and chart the mean AUC improvement of the
//! full method over the baseline, sharing stage-1 artifacts across K.
//!
//! ```bash
//! cargo run -p modl --example k_sweep
//! ```

use modl::config::ExperimentConfig;
use modl::runner;

fn main() -> modl::Result<()> {
    let mut config = ExperimentConfig::example();
    config.dataset.n_samples = Some(1200);
    config.dataset.feature_dim = Some(16);
    config.dataset.classes = Some(3);
    config.train.epochs = 6;
    config.eval.seeds = vec![0, 1];
    config.eval.k_sweep = vec![3, 5, 7, 9, 11];

    let dir = tempfile::tempdir().map_err(modl::Error::Io)?;
    let out = dir.path().join("sweep");
    let rows = runner::sweep_k(&config, &out)?;

    println!("K   mean AUC improvement over baseline");
    let max = rows
        .iter()
        .map(|r| r.mean_improvement)
        .fold(f64::MIN, f64::max)
        .max(1e-9);
    for row in &rows {
        let bar = "#".repeat(((row.mean_improvement / max) * 40.0).max(0.0) as usize);
        println!("{:<3} {:+.4}  {}", row.k, row.mean_improvement, bar);
    }
    println!("\nksweep.csv written to {}", out.display());
    Ok(())
}
