//! Build the soft label distribution: train a small reference zoo, average
//! its predictions, and persist the result to the binary soft-label file.
//!
//! ```bash
//! cargo run -p modl --example soft_labels
//! ```

use modl::data::{generate_synthetic, split, RawLabel, SynthConfig};
use modl::labels::{read_soft_labels, write_soft_labels};
use modl::net::{Activation, ModelSpec};
use modl::train::{distill_setup, train_reference, TrainConfig};

fn main() -> modl::Result<()> {
    let dataset = generate_synthetic(&SynthConfig {
        n_samples: 900,
        feature_dim: 12,
        classes: 3,
        flip_rate: 0.2,
        uncertain_fraction: 0.15,
        separation: 2.5,
        seed: 3,
    })?;
    let (train, valid, _) = split(&dataset, (0.6, 0.2, 0.2), 5)?;
    let config = TrainConfig { k: 5, epochs: 6, ..TrainConfig::default() };

    // Three heterogeneous references are enough to see the averaging effect.
    let mut references = Vec::new();
    for (name, hidden, seed) in [
        ("ref-32", vec![32], 201u64),
        ("ref-64", vec![64], 202),
        ("ref-32x32", vec![32, 32], 203),
    ] {
        let spec = ModelSpec::new(name, 12, hidden, 3, Activation::Tanh, seed)?;
        let outcome = train_reference(&train, &valid, &spec, &config)?;
        println!(
            "{name:<9} trained; best valid AUC {:.4}",
            outcome.best_valid_auc.unwrap_or(f64::NAN)
        );
        references.push((spec, outcome.best_params));
    }

    let (soft, _pool) = distill_setup(&references, &train, &config)?;
    println!(
        "soft labels: {} samples x {} classes from {} models",
        soft.len(),
        soft.classes,
        soft.source_hashes.len()
    );

    // Noisy raw labels against the averaged soft value, first few samples.
    println!("\nsample  raw labels        soft label row");
    for (row, sample) in train.samples.iter().take(5).enumerate() {
        let raw: Vec<&str> = sample
            .raw_labels
            .iter()
            .map(|l| match l {
                RawLabel::Positive => "pos",
                RawLabel::Negative => "neg",
                RawLabel::Uncertain => "unc",
                RawLabel::Unmentioned => "---",
            })
            .collect();
        let soft_row: Vec<String> = soft.row(row).iter().map(|v| format!("{v:.2}")).collect();
        println!("{:>6}  {:<16}  {}", sample.id, raw.join(" "), soft_row.join(" "));
    }

    let dir = tempfile::tempdir().map_err(modl::Error::Io)?;
    let path = dir.path().join("soft_labels.bin");
    write_soft_labels(&soft, &path)?;
    let restored = read_soft_labels(&path)?;
    println!(
        "\npersisted and restored bit-exactly: {}",
        restored.content_hash() == soft.content_hash()
    );
    Ok(())
}
