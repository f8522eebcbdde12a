//! Generate a synthetic noisy multi-label dataset, look at its label noise,
//! round-trip it through the CSV format, and split it.
//!
//! ```bash
//! cargo run -p modl --example synthetic_data
//! ```

use modl::data::{generate_synthetic, load_csv, split, write_csv, RawLabel, SynthConfig};

fn main() -> modl::Result<()> {
    let config = SynthConfig {
        n_samples: 1000,
        feature_dim: 16,
        classes: 4,
        flip_rate: 0.2,
        uncertain_fraction: 0.15,
        separation: 2.5,
        seed: 42,
    };
    let dataset = generate_synthetic(&config)?;
    println!(
        "generated {} samples, {} features, {} classes",
        dataset.len(),
        dataset.feature_dim(),
        dataset.classes()
    );

    // Label-noise census across all (sample, class) slots.
    let mut counts = [0usize; 4];
    let mut corrupted = 0usize;
    for s in &dataset.samples {
        let truth = s.true_probs.as_ref().unwrap();
        for (c, &label) in s.raw_labels.iter().enumerate() {
            let idx = match label {
                RawLabel::Positive => 0,
                RawLabel::Negative => 1,
                RawLabel::Uncertain => 2,
                RawLabel::Unmentioned => 3,
            };
            counts[idx] += 1;
            let clean = truth[c] >= 0.5;
            let noisy = match label {
                RawLabel::Positive => !clean,
                RawLabel::Negative => clean,
                _ => true,
            };
            if noisy {
                corrupted += 1;
            }
        }
    }
    let total = dataset.len() * dataset.classes();
    println!(
        "label slots: {} positive, {} negative, {} uncertain ({:.1}% disagree with clean labels)",
        counts[0],
        counts[1],
        counts[2],
        100.0 * corrupted as f64 / total as f64
    );

    // CSV round trip drops the generator's true probabilities.
    let dir = tempfile::tempdir().map_err(modl::Error::Io)?;
    let path = dir.path().join("labels.csv");
    write_csv(&dataset, &path)?;
    let loaded = load_csv(&path)?;
    println!(
        "csv round trip: {} rows reloaded from {}",
        loaded.len(),
        path.display()
    );

    let (train, valid, test) = split(&dataset, (0.7, 0.15, 0.15), 11)?;
    println!(
        "split sizes: train {} / valid {} / test {}",
        train.len(),
        valid.len(),
        test.len()
    );
    Ok(())
}
