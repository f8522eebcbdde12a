//! The four-arm ablation on a small synthetic benchmark: baseline, each
//! auxiliary loss alone, and both together, over a couple of seeds.
//!
//! ```bash
//! cargo run -p modl --example ablation
//! ```

use std::collections::HashMap;

use modl::config::ExperimentConfig;
use modl::eval::{ablation_report, Arm};
use modl::runner;

fn main() -> modl::Result<()> {
    let mut config = ExperimentConfig::example();
    config.dataset.n_samples = Some(1200);
    config.dataset.feature_dim = Some(16);
    config.dataset.classes = Some(3);
    config.train.epochs = 6;
    config.eval.seeds = vec![0, 1];

    let dir = tempfile::tempdir().map_err(modl::Error::Io)?;
    let out = dir.path().join("ablation");
    let summary = runner::run(&config, &out)?;

    let mut runs: HashMap<Arm, Vec<_>> = HashMap::new();
    for result in &summary.results {
        for (arm, report) in &result.arm_reports {
            runs.entry(*arm).or_default().push(report.clone());
        }
    }
    let class_names = summary.results[0].ensemble_report.class_names.clone();
    let table = ablation_report(&runs, &class_names)?;

    println!("arm           per-class AUC (mean over seeds)        mean    spread");
    for arm in &table.arms {
        let classes: Vec<String> = arm
            .class_mean
            .iter()
            .map(|v| v.map_or("  -  ".into(), |x| format!("{x:.4}")))
            .collect();
        println!(
            "{:<13} {}   {:.4}  {:.4}",
            arm.arm.label(),
            classes.join("  "),
            arm.mean_auc,
            arm.spread
        );
    }
    println!("\ndeltas vs baseline:");
    for arm in &table.arms {
        let delta = arm.mean_auc - table.arms[0].mean_auc;
        println!("  {:<13} {:+.4}", arm.arm.label(), delta);
    }
    println!("\nfull artifacts (metrics.csv, ablation.csv, ROC exports) in {}", out.display());
    Ok(())
}
