//! Config-driven experiment harness: stage-1 reference training with
//! content-addressed caching, distillation artifacts, the four ablation
//! arms, the K sweep, and human-readable reporting.
//!
//! Every artifact lands inside the output directory, keyed only by the
//! config snapshot, so a rerun with the same config reproduces every file
//! byte for byte (and skips stage 1 via the cache).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bytes::{derive_seed, write_atomic, Fnv1a};
use crate::config::{DatasetKind, ExperimentConfig};
use crate::data::{generate_synthetic, load_csv, split, Dataset};
use crate::error::{Error, Result};
use crate::eval::{
    ablation_report, ensemble_evaluate, evaluate, AblationTable, Arm, EvalReport, EvalTargets,
};
use crate::labels::{read_soft_labels, write_soft_labels, SoftLabelDistribution};
use crate::neighbors::{build_neighbor_pool, read_pool, write_pool, NeighborPool};
use crate::net::{load_checkpoint_for, save_checkpoint, Parameters};
use crate::train::{distill_setup, train_reference, train_target, TrainConfig, TrainOutcome};
use crate::zoo::Zoo;

const SEED_TAG_DATASET: u64 = 11;
const SEED_TAG_SPLIT: u64 = 12;
const SEED_TAG_TRAIN: u64 = 13;

/// One experiment seed's materialized inputs.
pub struct Trial {
    pub seed: u64,
    pub train: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
    pub zoo: Zoo,
    pub train_config: TrainConfig,
    pub test_targets: EvalTargets,
}

/// Build the trial for one experiment seed: the dataset draw, the split, and
/// the training streams all derive from it, so arms within a seed stay
/// paired while seeds are independent.
pub fn build_trial(config: &ExperimentConfig, seed: u64) -> Result<Trial> {
    let dataset = match config.dataset.kind {
        DatasetKind::Synthetic => {
            let mut synth = config.dataset.synth()?;
            synth.seed = derive_seed(synth.seed, derive_seed(SEED_TAG_DATASET, seed));
            generate_synthetic(&synth)?
        }
        DatasetKind::Csv => load_csv(config.dataset.csv_path()?)?,
    };
    let split_seed = derive_seed(config.dataset.split_seed, derive_seed(SEED_TAG_SPLIT, seed));
    let fr = config.dataset.split;
    let (train, valid, test) = split(&dataset, (fr[0], fr[1], fr[2]), split_seed)?;
    let mut train_config = config.train.clone();
    train_config.seed = derive_seed(config.train.seed, derive_seed(SEED_TAG_TRAIN, seed));

    // Test-time ground truth: the generator's clean labels when available,
    // otherwise the raw labels with uncertain slots excluded. Training and
    // validation never see the clean labels.
    let test_targets = match EvalTargets::from_true_probs(&test) {
        Ok(t) => t,
        Err(_) => EvalTargets::from_raw_labels(&test),
    };
    let zoo = config.resolve_zoo()?;
    Ok(Trial {
        seed,
        train,
        valid,
        test,
        zoo,
        train_config,
        test_targets,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub kind: String,
    pub seed: u64,
    pub name: String,
    pub path: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub status: String,
    pub seeds: Vec<u64>,
    pub artifacts: Vec<ManifestEntry>,
}

struct ManifestWriter {
    path: PathBuf,
    manifest: Mutex<Manifest>,
}

impl ManifestWriter {
    fn new(out: &Path, config_hash: u64, seeds: Vec<u64>) -> Self {
        ManifestWriter {
            path: out.join("manifest.json"),
            manifest: Mutex::new(Manifest {
                config_hash: format!("{config_hash:016x}"),
                status: "partial".to_string(),
                seeds,
                artifacts: Vec::new(),
            }),
        }
    }

    fn record(&self, kind: &str, seed: u64, name: &str, path: &Path, out: &Path) {
        let rel = path.strip_prefix(out).unwrap_or(path).to_string_lossy().to_string();
        let mut m = self.manifest.lock().expect("manifest lock");
        m.artifacts.push(ManifestEntry {
            kind: kind.to_string(),
            seed,
            name: name.to_string(),
            path: rel,
        });
        let _ = self.flush_locked(&m);
    }

    fn finish(&self) -> Result<()> {
        let mut m = self.manifest.lock().expect("manifest lock");
        m.status = "complete".to_string();
        m.artifacts.sort_by(|a, b| {
            (a.seed, &a.kind, &a.name).cmp(&(b.seed, &b.kind, &b.name))
        });
        self.flush_locked(&m)
    }

    fn flush_locked(&self, m: &Manifest) -> Result<()> {
        let json = serde_json::to_string_pretty(m)
            .map_err(|e| Error::contract(format!("manifest serialization: {e}")))?;
        write_atomic(&self.path, json.as_bytes())
    }
}

fn stage1_cache_dir(out: &Path, trial: &Trial) -> PathBuf {
    let mut h = Fnv1a::new();
    h.update_u64(trial.train.content_hash());
    h.update_u64(trial.valid.content_hash());
    h.update_u64(trial.zoo.hash());
    h.update_u64(trial.train_config.stage1_hash());
    out.join("cache").join(format!("stage1-{:016x}", h.finish()))
}

fn pool_file_name(k: usize, sigma: f64) -> String {
    let mut h = Fnv1a::new();
    h.update_u64(k as u64);
    h.update_f64(sigma);
    format!("pool-k{k}-{:08x}.bin", h.finish() as u32)
}

/// Train (or load from cache) every reference model for a trial.
pub fn stage1_references(
    trial: &Trial,
    cache_dir: &Path,
) -> Result<Vec<(crate::net::ModelSpec, Parameters)>> {
    std::fs::create_dir_all(cache_dir)?;
    trial
        .zoo
        .references
        .par_iter()
        .map(|spec| {
            let path = cache_dir.join(format!("{}.ckpt", spec.name));
            if path.exists() {
                match load_checkpoint_for(&path, spec) {
                    Ok(params) => {
                        log::info!("stage-1 cache hit: {} ({})", spec.name, path.display());
                        return Ok((spec.clone(), params));
                    }
                    Err(e) => {
                        log::warn!("stage-1 cache entry for {} unusable ({e}); retraining", spec.name);
                    }
                }
            }
            let out = train_reference(&trial.train, &trial.valid, spec, &trial.train_config)?;
            save_checkpoint(&path, spec, &out.best_params)?;
            Ok((spec.clone(), out.best_params))
        })
        .collect()
}

/// Load or compute the frozen soft labels and neighbor pool for a trial.
pub fn distill_artifacts(
    trial: &Trial,
    references: &[(crate::net::ModelSpec, Parameters)],
    cache_dir: &Path,
    k: usize,
) -> Result<(SoftLabelDistribution, NeighborPool)> {
    let soft_path = cache_dir.join("soft_labels.bin");
    let soft = if soft_path.exists() {
        match read_soft_labels(&soft_path) {
            Ok(s) => {
                log::info!("soft-label cache hit: {}", soft_path.display());
                s
            }
            Err(e) => {
                log::warn!("soft-label cache unusable ({e}); recomputing");
                let (s, _) = distill_setup(references, &trial.train, &trial.train_config)?;
                write_soft_labels(&s, &soft_path)?;
                s
            }
        }
    } else {
        let (s, _) = distill_setup(references, &trial.train, &trial.train_config)?;
        write_soft_labels(&s, &soft_path)?;
        s
    };

    let pool_path = cache_dir.join(pool_file_name(k, trial.train_config.sigma));
    let pool = if pool_path.exists() {
        match read_pool(&pool_path) {
            Ok(p) => {
                log::info!("pool cache hit: {}", pool_path.display());
                p
            }
            Err(e) => {
                log::warn!("pool cache unusable ({e}); recomputing");
                let p = build_neighbor_pool(&soft, k, trial.train_config.sigma)?;
                write_pool(&p, &pool_path)?;
                p
            }
        }
    } else {
        let p = build_neighbor_pool(&soft, k, trial.train_config.sigma)?;
        write_pool(&p, &pool_path)?;
        p
    };
    Ok((soft, pool))
}

fn write_train_log(path: &Path, outcome: &TrainOutcome) -> Result<()> {
    let mut text = String::from("epoch,step,cls,distri,neigh,total,lr\n");
    for row in &outcome.loss_log {
        writeln!(
            text,
            "{},{},{},{},{},{},{}",
            row.epoch, row.step, row.cls, row.distri, row.neigh, row.total, row.lr
        )
        .expect("string write");
    }
    write_atomic(path, text.as_bytes())
}

fn write_report_files(dir: &Path, name: &str, report: &EvalReport) -> Result<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::contract(format!("report serialization: {e}")))?;
    write_atomic(&dir.join(format!("{name}.json")), json.as_bytes())?;

    let mut csv = String::from("class,auc\n");
    for (class, auc) in report.class_names.iter().zip(&report.class_auc) {
        match auc {
            Some(a) => writeln!(csv, "{class},{a}").expect("string write"),
            None => writeln!(csv, "{class},").expect("string write"),
        }
    }
    match report.mean_auc {
        Some(m) => writeln!(csv, "mean,{m}").expect("string write"),
        None => writeln!(csv, "mean,").expect("string write"),
    }
    write_atomic(&dir.join(format!("{name}.csv")), csv.as_bytes())
}

fn write_roc_files(dir: &Path, report: &EvalReport) -> Result<()> {
    for (class, points) in report.class_names.iter().zip(&report.roc) {
        let mut csv = String::from("fpr,tpr\n");
        for (fpr, tpr) in points {
            writeln!(csv, "{fpr},{tpr}").expect("string write");
        }
        write_atomic(&dir.join(format!("{class}.csv")), csv.as_bytes())?;
    }
    Ok(())
}

/// Everything produced for one seed.
pub struct TrialResult {
    pub seed: u64,
    pub arm_reports: HashMap<Arm, EvalReport>,
    pub ensemble_report: EvalReport,
}

fn run_trial(
    config: &ExperimentConfig,
    seed: u64,
    arms: &[Arm],
    out: &Path,
    manifest: &ManifestWriter,
) -> Result<TrialResult> {
    let trial = build_trial(config, seed)?;
    let cache_dir = stage1_cache_dir(out, &trial);
    let references = stage1_references(&trial, &cache_dir)?;
    for (spec, _) in &references {
        manifest.record(
            "reference-checkpoint",
            seed,
            &spec.name,
            &cache_dir.join(format!("{}.ckpt", spec.name)),
            out,
        );
    }
    let (soft, pool) = distill_artifacts(&trial, &references, &cache_dir, trial.train_config.k)?;
    manifest.record("soft-labels", seed, "soft_labels", &cache_dir.join("soft_labels.bin"), out);
    manifest.record(
        "neighbor-pool",
        seed,
        "pool",
        &cache_dir.join(pool_file_name(trial.train_config.k, trial.train_config.sigma)),
        out,
    );

    let seed_dir = out.join(format!("seed_{seed}"));
    let arm_reports: HashMap<Arm, EvalReport> = arms
        .par_iter()
        .map(|&arm| {
            let (lambda, gamma) = arm.weights(config.train.lambda, config.train.gamma);
            let mut cfg = trial.train_config.clone();
            cfg.lambda = lambda;
            cfg.gamma = gamma;
            let outcome =
                train_target(&trial.train, &trial.valid, &trial.zoo.target, &soft, &pool, &cfg)?;

            let ckpt = seed_dir.join("arms").join(format!("{}.ckpt", arm.slug()));
            save_checkpoint(&ckpt, &trial.zoo.target, &outcome.best_params)?;
            let log_path = seed_dir.join("logs").join(format!("{}.train.csv", arm.slug()));
            write_train_log(&log_path, &outcome)?;

            let report = evaluate(
                &trial.zoo.target,
                &outcome.best_params,
                &trial.test,
                &trial.test_targets,
            )?;
            let eval_dir = seed_dir.join("eval");
            std::fs::create_dir_all(&eval_dir)?;
            write_report_files(&eval_dir, arm.slug(), &report)?;
            let roc_dir = seed_dir.join("roc").join(arm.slug());
            std::fs::create_dir_all(&roc_dir)?;
            write_roc_files(&roc_dir, &report)?;

            manifest.record("arm-checkpoint", seed, arm.slug(), &ckpt, out);
            manifest.record("train-log", seed, arm.slug(), &log_path, out);
            manifest.record("eval-report", seed, arm.slug(), &eval_dir.join(format!("{}.json", arm.slug())), out);
            Ok((arm, report))
        })
        .collect::<Result<HashMap<_, _>>>()?;

    let ensemble_report = ensemble_evaluate(&references, &trial.test, &trial.test_targets)?;
    let eval_dir = seed_dir.join("eval");
    std::fs::create_dir_all(&eval_dir)?;
    write_report_files(&eval_dir, "ensemble", &ensemble_report)?;
    manifest.record("eval-report", seed, "ensemble", &eval_dir.join("ensemble.json"), out);

    Ok(TrialResult {
        seed,
        arm_reports,
        ensemble_report,
    })
}

/// Aggregated outcome of a full run.
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub results: Vec<TrialResult>,
    pub ablation: Option<AblationTable>,
}

fn metrics_csv(results: &[TrialResult], class_names: &[String]) -> String {
    let mut text = String::from("seed,model,mean_auc,params");
    for c in class_names {
        write!(text, ",auc_{c}").expect("string write");
    }
    text.push('\n');
    let mut rows: Vec<(u64, String, &EvalReport)> = Vec::new();
    for r in results {
        for (arm, report) in &r.arm_reports {
            rows.push((r.seed, arm.label().to_string(), report));
        }
        rows.push((r.seed, "Ensemble".to_string(), &r.ensemble_report));
    }
    rows.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
    for (seed, model, report) in rows {
        match report.mean_auc {
            Some(m) => write!(text, "{seed},{model},{m},{}", report.param_count),
            None => write!(text, "{seed},{model},,{}", report.param_count),
        }
        .expect("string write");
        for auc in &report.class_auc {
            match auc {
                Some(a) => write!(text, ",{a}").expect("string write"),
                None => text.push(','),
            }
        }
        text.push('\n');
    }
    text
}

fn ablation_csvs(table: &AblationTable) -> (String, String) {
    let mut main = String::from("arm");
    for c in &table.class_names {
        write!(main, ",{c}").expect("string write");
    }
    main.push_str(",mean_auc,spread\n");
    let mut deltas = String::from("arm");
    for c in &table.class_names {
        write!(deltas, ",delta_{c}").expect("string write");
    }
    deltas.push_str(",mean_delta\n");
    let baseline_mean = table
        .arms
        .iter()
        .find(|a| a.arm == Arm::Baseline)
        .map(|a| a.mean_auc)
        .unwrap_or(f64::NAN);
    for arm in &table.arms {
        write!(main, "{}", arm.arm.label()).expect("string write");
        for v in &arm.class_mean {
            match v {
                Some(x) => write!(main, ",{x}").expect("string write"),
                None => main.push(','),
            }
        }
        writeln!(main, ",{},{}", arm.mean_auc, arm.spread).expect("string write");

        write!(deltas, "{}", arm.arm.label()).expect("string write");
        for v in &arm.class_delta_vs_baseline {
            match v {
                Some(x) => write!(deltas, ",{x}").expect("string write"),
                None => deltas.push(','),
            }
        }
        writeln!(deltas, ",{}", arm.mean_auc - baseline_mean).expect("string write");
    }
    (main, deltas)
}

fn install_pool<R: Send>(workers: usize, op: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        return op();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("worker pool");
    pool.install(op)
}

/// Execute the configured experiment into `out`: stage 1 (cached), the
/// distillation artifacts, every configured arm over every seed, ensemble
/// evaluation, and the aggregate CSVs.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    config.validate()?;
    std::fs::create_dir_all(out)?;

    // Resolved snapshot: the zoo is expanded so the snapshot alone pins
    // every model layout.
    let mut snapshot = config.clone();
    let zoo = config.resolve_zoo()?;
    snapshot.zoo.references = Some(zoo.references.clone());
    snapshot.zoo.target = Some(zoo.target.clone());
    snapshot.output_dir = None;
    write_atomic(&out.join("config.toml"), snapshot.to_toml()?.as_bytes())?;

    let seeds = config.eval.seeds.clone();
    let arms = config.arms()?;
    let manifest = ManifestWriter::new(out, snapshot.content_hash(), seeds.clone());

    let results: Vec<TrialResult> = install_pool(config.workers, || {
        seeds
            .par_iter()
            .map(|&seed| run_trial(config, seed, &arms, out, &manifest))
            .collect::<Result<Vec<_>>>()
    })?;

    let class_names = match results.first() {
        Some(r) => r.ensemble_report.class_names.clone(),
        None => Vec::new(),
    };
    write_atomic(&out.join("metrics.csv"), metrics_csv(&results, &class_names).as_bytes())?;

    let ablation = if Arm::ALL.iter().all(|a| arms.contains(a)) {
        // `results` is in seed order, so each arm's report list is too.
        let mut runs: HashMap<Arm, Vec<EvalReport>> = HashMap::new();
        for r in &results {
            for (arm, report) in &r.arm_reports {
                runs.entry(*arm).or_default().push(report.clone());
            }
        }
        let table = ablation_report(&runs, &class_names)?;
        let (main, deltas) = ablation_csvs(&table);
        write_atomic(&out.join("ablation.csv"), main.as_bytes())?;
        write_atomic(&out.join("ablation_deltas.csv"), deltas.as_bytes())?;
        Some(table)
    } else {
        log::info!("not all four arms configured; skipping the ablation table");
        None
    };

    manifest.finish()?;
    Ok(RunSummary {
        out_dir: out.to_path_buf(),
        seeds,
        results,
        ablation,
    })
}

/// One row of the K-sweep table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    /// Mean over seeds of (full-method mean AUC - baseline mean AUC).
    pub mean_improvement: f64,
    pub per_seed_improvement: Vec<f64>,
}

/// Run the full method once per K in the sweep list (shared seeds, shared
/// stage-1 artifacts) and emit `ksweep.csv` with per-K mean improvement over
/// the baseline arm.
pub fn sweep_k(config: &ExperimentConfig, out: &Path) -> Result<Vec<SweepRow>> {
    config.validate()?;
    std::fs::create_dir_all(out)?;
    let seeds = config.eval.seeds.clone();
    let ks = config.eval.k_sweep.clone();
    if ks.is_empty() {
        return Err(Error::config("eval.k_sweep", "no K values configured"));
    }
    let manifest = ManifestWriter::new(out, config.content_hash(), seeds.clone());

    struct SeedSweep {
        baseline_auc: f64,
        per_k_auc: Vec<f64>,
    }

    let per_seed: Vec<SeedSweep> = install_pool(config.workers, || {
        seeds
            .par_iter()
            .map(|&seed| {
                let trial = build_trial(config, seed)?;
                let cache_dir = stage1_cache_dir(out, &trial);
                let references = stage1_references(&trial, &cache_dir)?;
                let seed_dir = out.join(format!("seed_{seed}"));

                // Baseline arm; reuses the run() artifact when present.
                let baseline_path = seed_dir.join("arms").join("b.ckpt");
                let baseline_params = if baseline_path.exists() {
                    load_checkpoint_for(&baseline_path, &trial.zoo.target)?
                } else {
                    let mut cfg = trial.train_config.clone();
                    cfg.lambda = 0.0;
                    cfg.gamma = 0.0;
                    let (soft, pool) =
                        distill_artifacts(&trial, &references, &cache_dir, cfg.k)?;
                    let outcome = train_target(
                        &trial.train,
                        &trial.valid,
                        &trial.zoo.target,
                        &soft,
                        &pool,
                        &cfg,
                    )?;
                    save_checkpoint(&baseline_path, &trial.zoo.target, &outcome.best_params)?;
                    outcome.best_params
                };
                let baseline_report = evaluate(
                    &trial.zoo.target,
                    &baseline_params,
                    &trial.test,
                    &trial.test_targets,
                )?;
                let baseline_auc = baseline_report
                    .mean_auc
                    .ok_or_else(|| Error::contract("baseline mean AUC undefined"))?;

                let mut per_k_auc = Vec::with_capacity(ks.len());
                for &k in &ks {
                    let mut cfg = trial.train_config.clone();
                    cfg.k = k;
                    let (soft, pool) = distill_artifacts(&trial, &references, &cache_dir, k)?;
                    let outcome = train_target(
                        &trial.train,
                        &trial.valid,
                        &trial.zoo.target,
                        &soft,
                        &pool,
                        &cfg,
                    )?;
                    let ckpt = seed_dir.join("sweep").join(format!("k{k}.ckpt"));
                    save_checkpoint(&ckpt, &trial.zoo.target, &outcome.best_params)?;
                    manifest.record("sweep-checkpoint", seed, &format!("k{k}"), &ckpt, out);
                    let report = evaluate(
                        &trial.zoo.target,
                        &outcome.best_params,
                        &trial.test,
                        &trial.test_targets,
                    )?;
                    per_k_auc.push(
                        report
                            .mean_auc
                            .ok_or_else(|| Error::contract("sweep mean AUC undefined"))?,
                    );
                }
                Ok(SeedSweep { baseline_auc, per_k_auc })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let rows: Vec<SweepRow> = ks
        .iter()
        .enumerate()
        .map(|(ki, &k)| {
            let per_seed_improvement: Vec<f64> = per_seed
                .iter()
                .map(|s| s.per_k_auc[ki] - s.baseline_auc)
                .collect();
            let mean_improvement =
                per_seed_improvement.iter().sum::<f64>() / per_seed_improvement.len() as f64;
            SweepRow {
                k,
                mean_improvement,
                per_seed_improvement,
            }
        })
        .collect();

    let mut csv = String::from("k,mean_improvement\n");
    for row in &rows {
        writeln!(csv, "{},{}", row.k, row.mean_improvement).expect("string write");
    }
    write_atomic(&out.join("ksweep.csv"), csv.as_bytes())?;
    manifest.finish()?;
    Ok(rows)
}

/// Render the populated output directory as a human-readable summary:
/// the ablation table, the K sweep when present, and the single-model vs
/// ensemble comparison.
pub fn report(out: &Path) -> Result<String> {
    let metrics_path = out.join("metrics.csv");
    if !metrics_path.exists() {
        return Err(Error::Missing(format!(
            "{} not found; `run` the experiment first",
            metrics_path.display()
        )));
    }
    let metrics = std::fs::read_to_string(&metrics_path)?;
    let mut text = String::new();

    let ablation_path = out.join("ablation.csv");
    if ablation_path.exists() {
        writeln!(text, "Ablation (mean AUC over seeds)").expect("string write");
        writeln!(text, "{}", render_csv_table(&std::fs::read_to_string(&ablation_path)?))
            .expect("string write");
    } else {
        writeln!(text, "Ablation table absent; `run` with all four arms to produce it.\n")
            .expect("string write");
    }

    let ksweep_path = out.join("ksweep.csv");
    if ksweep_path.exists() {
        writeln!(text, "K sweep (mean AUC improvement over baseline)").expect("string write");
        writeln!(text, "{}", render_csv_table(&std::fs::read_to_string(&ksweep_path)?))
            .expect("string write");
    } else {
        writeln!(text, "K sweep absent; use the sweep-k subcommand to produce it.\n")
            .expect("string write");
    }

    // Single model vs ensemble, averaged over seeds.
    let mut per_model: HashMap<String, (Vec<f64>, usize)> = HashMap::new();
    for line in metrics.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 4 {
            continue;
        }
        let model = fields[1].to_string();
        if let (Ok(auc), Ok(params)) = (fields[2].parse::<f64>(), fields[3].parse::<usize>()) {
            let entry = per_model.entry(model).or_insert((Vec::new(), params));
            entry.0.push(auc);
            entry.1 = params;
        }
    }
    writeln!(text, "Single model vs ensemble (mean AUC over seeds)").expect("string write");
    let mut names: Vec<&String> = per_model.keys().collect();
    names.sort();
    for name in names {
        let (aucs, params) = &per_model[name];
        let mean = aucs.iter().sum::<f64>() / aucs.len() as f64;
        writeln!(text, "  {name:<14} mean AUC {mean:.4}  params {params}").expect("string write");
    }
    Ok(text)
}

fn render_csv_table(csv: &str) -> String {
    let rows: Vec<Vec<String>> = csv
        .lines()
        .map(|l| l.split(',').map(|c| c.to_string()).collect())
        .collect();
    if rows.is_empty() {
        return String::new();
    }
    let cols = rows.iter().map(|r| r.len()).max().unwrap_or(0);
    let mut widths = vec![0usize; cols];
    let fmt_cell = |cell: &str| -> String {
        match cell.parse::<f64>() {
            Ok(v) if cell.contains('.') => format!("{v:.4}"),
            _ => cell.to_string(),
        }
    };
    for r in &rows {
        for (i, c) in r.iter().enumerate() {
            widths[i] = widths[i].max(fmt_cell(c).len());
        }
    }
    let mut out = String::new();
    for r in &rows {
        for (i, c) in r.iter().enumerate() {
            let cell = fmt_cell(c);
            write!(out, "{cell:>w$}  ", w = widths[i]).expect("string write");
        }
        out.push('\n');
    }
    out
}
