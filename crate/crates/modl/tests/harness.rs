//! End-to-end tests of the experiment harness and the `modl` binary:
//! artifact layout, stage-1 caching, pool rebuilds, frozen stage-2 inputs,
//! and the report/validate subcommands.

use std::path::Path;
use std::process::Command;

use modl::bytes::fnv1a64;
use modl::config::ExperimentConfig;
use modl::runner;

fn tiny_config() -> ExperimentConfig {
    let mut config = ExperimentConfig::example();
    config.dataset.n_samples = Some(300);
    config.dataset.feature_dim = Some(8);
    config.dataset.classes = Some(3);
    config.train.epochs = 2;
    config.train.k = 3;
    config.eval.seeds = vec![0];
    config.eval.k_sweep = vec![2, 3];
    config
}

fn file_hash(path: &Path) -> u64 {
    fnv1a64(&std::fs::read(path).unwrap())
}

#[test]
fn run_produces_the_expected_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = tiny_config();
    runner::run(&config, &out).unwrap();

    // Six reference checkpoints in the stage-1 cache.
    let cache: Vec<_> = std::fs::read_dir(out.join("cache"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(cache.len(), 1, "one stage-1 cache dir per seed");
    let refs: Vec<_> = std::fs::read_dir(&cache[0])
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "ckpt"))
        .collect();
    assert_eq!(refs.len(), 6);
    assert!(cache[0].join("soft_labels.bin").exists());

    // Four arm checkpoints plus logs, reports, and ROC exports.
    let seed_dir = out.join("seed_0");
    for slug in ["b", "b-modl", "b-knns", "b-modl-knns"] {
        assert!(seed_dir.join("arms").join(format!("{slug}.ckpt")).exists());
        assert!(seed_dir.join("logs").join(format!("{slug}.train.csv")).exists());
        assert!(seed_dir.join("eval").join(format!("{slug}.json")).exists());
        assert!(seed_dir.join("eval").join(format!("{slug}.csv")).exists());
        for class in ["class0", "class1", "class2"] {
            assert!(seed_dir.join("roc").join(slug).join(format!("{class}.csv")).exists());
        }
    }
    assert!(seed_dir.join("eval").join("ensemble.json").exists());

    // Aggregates, snapshot, and manifest.
    for f in ["metrics.csv", "ablation.csv", "ablation_deltas.csv", "config.toml", "manifest.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }

    // Training log columns.
    let log = std::fs::read_to_string(seed_dir.join("logs").join("b.train.csv")).unwrap();
    assert!(log.starts_with("epoch,step,cls,distri,neigh,total,lr\n"));

    // The ablation table has exactly the four arms.
    let ablation = std::fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(ablation.lines().count(), 5);

    // The manifest is complete and lists relative paths that exist.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "complete");
    for artifact in manifest["artifacts"].as_array().unwrap() {
        assert!(out.join(artifact["path"].as_str().unwrap()).exists());
    }
}

#[test]
fn rerun_reuses_stage1_and_rebuilds_deleted_pool_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = tiny_config();
    runner::run(&config, &out).unwrap();

    let cache_dir = std::fs::read_dir(out.join("cache"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let ref_ckpt = cache_dir.join("ref-64.ckpt");
    let pool_path = std::fs::read_dir(&cache_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.file_name().unwrap().to_string_lossy().starts_with("pool-"))
        .unwrap();
    let ref_mtime = std::fs::metadata(&ref_ckpt).unwrap().modified().unwrap();
    let pool_bytes = std::fs::read(&pool_path).unwrap();

    // Delete the pool, rerun: stage 1 must be skipped (checkpoint untouched)
    // and the pool rebuilt with identical bytes.
    std::fs::remove_file(&pool_path).unwrap();
    runner::run(&config, &out).unwrap();
    assert_eq!(
        std::fs::metadata(&ref_ckpt).unwrap().modified().unwrap(),
        ref_mtime,
        "reference checkpoint was rewritten; stage-1 cache miss"
    );
    assert_eq!(std::fs::read(&pool_path).unwrap(), pool_bytes);
}

#[test]
fn stage2_leaves_stage1_artifacts_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = tiny_config();
    runner::run(&config, &out).unwrap();

    let cache_dir = std::fs::read_dir(out.join("cache"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let hashes: Vec<(std::path::PathBuf, u64)> = std::fs::read_dir(&cache_dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.clone(), file_hash(&p)))
        .collect();
    assert!(hashes.len() >= 8); // 6 refs + soft labels + pool

    // Re-run arms (stage 2) on top of the cache; every frozen input must
    // hash identically afterwards.
    runner::run(&config, &out).unwrap();
    for (path, before) in hashes {
        assert_eq!(file_hash(&path), before, "{} changed", path.display());
    }
}

#[test]
fn sweep_then_report_covers_all_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = tiny_config();
    runner::run(&config, &out).unwrap();
    let rows = runner::sweep_k(&config, &out).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(out.join("ksweep.csv").exists());

    let text = runner::report(&out).unwrap();
    assert!(text.contains("Ablation"), "{text}");
    assert!(text.contains("K sweep"), "{text}");
    assert!(text.contains("Ensemble"), "{text}");
    assert!(text.contains("B+MODL+KNNS"), "{text}");

    // Reporting twice is identical.
    assert_eq!(text, runner::report(&out).unwrap());
}

#[test]
fn report_on_empty_directory_is_actionable() {
    let dir = tempfile::tempdir().unwrap();
    let err = runner::report(dir.path()).unwrap_err();
    assert!(err.to_string().contains("run"), "{err}");
}

// CLI binary round trip: validate, run, report, sweep-k.
#[test]
fn cli_binary_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("exp.toml");
    let out = dir.path().join("out");
    let config = tiny_config();
    std::fs::write(&config_path, config.to_toml().unwrap()).unwrap();

    let bin = env!("CARGO_BIN_EXE_modl");
    let run = |args: &[&str]| -> (bool, String) {
        let output = Command::new(bin).args(args).output().unwrap();
        let text = format!(
            "{}{}",
            String::from_utf8_lossy(&output.stdout),
            String::from_utf8_lossy(&output.stderr)
        );
        (output.status.success(), text)
    };

    let (ok, text) = run(&["validate", "--config", config_path.to_str().unwrap()]);
    assert!(ok, "{text}");
    assert!(text.contains("valid"));

    let (ok, text) = run(&[
        "run",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert!(ok, "{text}");
    assert!(out.join("metrics.csv").exists());

    let (ok, text) = run(&[
        "sweep-k",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seeds",
        "0",
    ]);
    assert!(ok, "{text}");
    assert!(text.contains("mean_improvement"));

    let (ok, text) = run(&["report", "--out", out.to_str().unwrap()]);
    assert!(ok, "{text}");
    assert!(text.contains("Ablation"));

    // Invalid config exits nonzero and names the field.
    let mut bad = tiny_config();
    bad.train.lambda = -1.0;
    let bad_path = dir.path().join("bad.toml");
    std::fs::write(&bad_path, bad.to_toml().unwrap()).unwrap();
    let (ok, text) = run(&["validate", "--config", bad_path.to_str().unwrap()]);
    assert!(!ok);
    assert!(text.contains("lambda"), "{text}");
}

// The dataset sanity ceiling: with no label noise, stage-1 training of a
// reasonably wide model reaches mean AUC > 0.95.
#[test]
fn clean_data_sanity_ceiling() {
    use modl::data::{generate_synthetic, split, SynthConfig};
    use modl::eval::{evaluate, EvalTargets};
    use modl::net::{Activation, ModelSpec};
    use modl::train::{train_reference, TrainConfig};

    let dataset = generate_synthetic(&SynthConfig {
        n_samples: 600,
        feature_dim: 16,
        classes: 3,
        flip_rate: 0.0,
        uncertain_fraction: 0.0,
        separation: 2.5,
        seed: 77,
    })
    .unwrap();
    let (train, valid, test) = split(&dataset, (0.6, 0.2, 0.2), 3).unwrap();
    let spec = ModelSpec::new("wide", 16, vec![64], 3, Activation::Tanh, 5).unwrap();
    let cfg = TrainConfig { epochs: 6, k: 3, ..TrainConfig::default() };
    let outcome = train_reference(&train, &valid, &spec, &cfg).unwrap();
    let targets = EvalTargets::from_true_probs(&test).unwrap();
    let report = evaluate(&spec, &outcome.best_params, &test, &targets).unwrap();
    let auc = report.mean_auc.unwrap();
    assert!(auc > 0.95, "clean-data AUC {auc}");
}

// CSV datasets drive the same pipeline end to end.
#[test]
fn csv_dataset_runs_through_the_harness() {
    use modl::data::{generate_synthetic, write_csv, SynthConfig};

    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("labels.csv");
    let dataset = generate_synthetic(&SynthConfig {
        n_samples: 240,
        feature_dim: 6,
        classes: 3,
        flip_rate: 0.1,
        uncertain_fraction: 0.1,
        separation: 2.5,
        seed: 13,
    })
    .unwrap();
    write_csv(&dataset, &csv_path).unwrap();

    let mut config = tiny_config();
    config.dataset.kind = modl::config::DatasetKind::Csv;
    config.dataset.path = Some(csv_path);
    config.dataset.n_samples = None;
    config.dataset.feature_dim = None;
    config.dataset.classes = None;

    let out = dir.path().join("out");
    let summary = runner::run(&config, &out).unwrap();
    assert_eq!(summary.results.len(), 1);
    // Without clean ground truth the evaluation falls back to raw labels.
    assert!(summary.results[0].ensemble_report.mean_auc.is_some());
}
