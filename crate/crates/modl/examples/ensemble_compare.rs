//! Single deployed model vs the reference ensemble: accuracy against
//! parameter count. The distilled-and-smoothed target should approach the
//! ensemble's mean AUC at a fraction of its size.
//!
//! ```bash
//! cargo run -p modl --example ensemble_compare
//! ```

use modl::data::{generate_synthetic, split, SynthConfig};
use modl::eval::{ensemble_evaluate, evaluate, EvalTargets};
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
        seed: 21,
    })?;
    let (train, valid, test) = split(&dataset, (0.35, 0.15, 0.5), 11)?;
    let zoo = default_zoo(24, 4)?;
    let config = TrainConfig::default();
    let targets = EvalTargets::from_true_probs(&test)?;

    let mut references = Vec::new();
    for spec in &zoo.references {
        let outcome = train_reference(&train, &valid, spec, &config)?;
        references.push((spec.clone(), outcome.best_params));
    }

    let (soft, pool) = distill_setup(&references, &train, &config)?;
    let target = train_target(&train, &valid, &zoo.target, &soft, &pool, &config)?;

    let baseline_cfg = TrainConfig { lambda: 0.0, gamma: 0.0, ..config };
    let baseline = train_target(&train, &valid, &zoo.target, &soft, &pool, &baseline_cfg)?;

    let base_report = evaluate(&zoo.target, &baseline.best_params, &test, &targets)?;
    let full_report = evaluate(&zoo.target, &target.best_params, &test, &targets)?;
    let ens_report = ensemble_evaluate(&references, &test, &targets)?;

    println!("model                     mean AUC   params");
    println!(
        "single target (baseline)  {:.4}     {}",
        base_report.mean_auc.unwrap_or(f64::NAN),
        base_report.param_count
    );
    println!(
        "single target (distilled) {:.4}     {}",
        full_report.mean_auc.unwrap_or(f64::NAN),
        full_report.param_count
    );
    println!(
        "six-reference ensemble    {:.4}     {}",
        ens_report.mean_auc.unwrap_or(f64::NAN),
        ens_report.param_count
    );
    println!(
        "\nthe deployed model keeps {:.1}% of the ensemble's parameters",
        100.0 * full_report.param_count as f64 / ens_report.param_count as f64
    );
    Ok(())
}
