//! The full two-stage procedure at a glance: pre-train references, freeze
//! their averaged predictions and the neighbor pool, then train the target
//! with the combined objective and compare it against the plain baseline.
//!
//! ```bash
//! cargo run -p modl --example two_stage
//! ```

use modl::data::{generate_synthetic, split, SynthConfig};
use modl::eval::{evaluate, EvalTargets};
use modl::train::{distill_setup, train_reference, train_target, TrainConfig};
use modl::zoo::default_zoo;

fn main() -> modl::Result<()> {
    let dataset = generate_synthetic(&SynthConfig {
        n_samples: 2000,
        feature_dim: 24,
        classes: 4,
        flip_rate: 0.2,
        uncertain_fraction: 0.15,
        separation: 2.5,
        seed: 9,
    })?;
    let (train, valid, test) = split(&dataset, (0.35, 0.15, 0.5), 11)?;
    let zoo = default_zoo(24, 4)?;
    let config = TrainConfig::default();
    let test_targets = EvalTargets::from_true_probs(&test)?;

    println!("stage 1: training {} references", zoo.references.len());
    let mut references = Vec::new();
    for spec in &zoo.references {
        let outcome = train_reference(&train, &valid, spec, &config)?;
        println!(
            "  {:<14} valid AUC {:.4} at epoch {}",
            spec.name,
            outcome.best_valid_auc.unwrap_or(f64::NAN),
            outcome.best_epoch
        );
        references.push((spec.clone(), outcome.best_params));
    }

    println!("\ndistilling: soft labels + neighbor pool (K = {})", config.k);
    let (soft, pool) = distill_setup(&references, &train, &config)?;
    println!(
        "  {} soft label rows, {} anchors with {} neighbors each",
        soft.len(),
        pool.len(),
        pool.k
    );

    println!("\nstage 2: target with distribution + neighbor smoothing losses");
    let full = train_target(&train, &valid, &zoo.target, &soft, &pool, &config)?;
    let full_report = evaluate(&zoo.target, &full.best_params, &test, &test_targets)?;

    // The plain baseline is the same model with both auxiliary weights zero.
    let baseline_cfg = TrainConfig { lambda: 0.0, gamma: 0.0, ..config };
    let base = train_target(&train, &valid, &zoo.target, &soft, &pool, &baseline_cfg)?;
    let base_report = evaluate(&zoo.target, &base.best_params, &test, &test_targets)?;

    println!(
        "\n{:<22} {:.4}",
        "baseline test mean AUC",
        base_report.mean_auc.unwrap_or(f64::NAN)
    );
    println!(
        "{:<22} {:.4}",
        "two-stage test mean AUC",
        full_report.mean_auc.unwrap_or(f64::NAN)
    );
    let sample = &full.loss_log[full.loss_log.len() / 2];
    println!(
        "\nmid-training loss row: cls {:.4}, distri {:.4}, neigh {:.4}, total {:.4}",
        sample.cls, sample.distri, sample.neigh, sample.total
    );
    Ok(())
}
