//! The experiment config file: TOML with `[dataset]`, `[zoo]`, `[train]`,
//! and `[eval]` sections. Unknown keys are rejected, and `validate` performs
//! the cross-field checks before any compute starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::SynthConfig;
use crate::error::{Error, Result};
use crate::eval::Arm;
use crate::train::TrainConfig;
use crate::zoo::{default_zoo, Zoo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Synthetic,
    Csv,
}

/// Dataset source plus split settings. Synthetic runs need the generator
/// fields; CSV runs need `path`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub kind: DatasetKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
    #[serde(default = "defaults::flip_rate")]
    pub flip_rate: f64,
    #[serde(default = "defaults::uncertain_fraction")]
    pub uncertain_fraction: f64,
    #[serde(default = "defaults::separation")]
    pub separation: f64,
    #[serde(default)]
    pub seed: u64,
    /// (train, valid, test) fractions; must sum to 1.
    #[serde(default = "defaults::split")]
    pub split: [f64; 3],
    #[serde(default)]
    pub split_seed: u64,
}

mod defaults {
    pub fn flip_rate() -> f64 {
        0.1
    }
    pub fn uncertain_fraction() -> f64 {
        0.1
    }
    pub fn separation() -> f64 {
        2.5
    }
    pub fn split() -> [f64; 3] {
        [0.7, 0.15, 0.15]
    }
}

impl DatasetSection {
    /// The generator config for synthetic runs.
    pub fn synth(&self) -> Result<SynthConfig> {
        let missing = |field: &str| Error::config(
            format!("dataset.{field}"),
            "required when kind = \"synthetic\"",
        );
        Ok(SynthConfig {
            n_samples: self.n_samples.ok_or_else(|| missing("n_samples"))?,
            feature_dim: self.feature_dim.ok_or_else(|| missing("feature_dim"))?,
            classes: self.classes.ok_or_else(|| missing("classes"))?,
            flip_rate: self.flip_rate,
            uncertain_fraction: self.uncertain_fraction,
            separation: self.separation,
            seed: self.seed,
        })
    }

    pub fn csv_path(&self) -> Result<&Path> {
        self.path
            .as_deref()
            .ok_or_else(|| Error::config("dataset.path", "required when kind = \"csv\""))
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            DatasetKind::Synthetic => {
                self.synth()?.validate()?;
                if self.path.is_some() {
                    return Err(Error::config("dataset.path", "not used for synthetic datasets"));
                }
            }
            DatasetKind::Csv => {
                let path = self.csv_path()?;
                if !path.exists() {
                    return Err(Error::config(
                        "dataset.path",
                        format!("{} does not exist", path.display()),
                    ));
                }
            }
        }
        if self.split.iter().any(|&f| f <= 0.0) {
            return Err(Error::config("dataset.split", "fractions must be positive"));
        }
        if (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("dataset.split", "fractions must sum to 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZooSection {
    /// When present, explicit specs; otherwise the default zoo is expanded
    /// from the dataset dimensions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub references: Option<Vec<crate::net::ModelSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<crate::net::ModelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    /// Ablation arms to run, as slugs: `b`, `b-modl`, `b-knns`, `b-modl-knns`.
    pub arms: Vec<String>,
    /// K values for the sweep subcommand.
    pub k_sweep: Vec<usize>,
    /// Experiment seeds; each seed draws its own dataset, split, and
    /// training streams, while arms within a seed stay paired.
    pub seeds: Vec<u64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            arms: Arm::ALL.iter().map(|a| a.slug().to_string()).collect(),
            k_sweep: vec![3, 5, 7, 9, 11],
            seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    #[serde(default)]
    pub zoo: ZooSection,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub eval: EvalSection,
    /// Worker threads for arms and seeds; 0 means one per CPU.
    /// (Top-level keys must precede the section tables in the TOML file.)
    #[serde(default)]
    pub workers: usize,
    /// Output directory; the CLI `--out` flag overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::config("<config>", e.to_string()))?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::config("<config>", e.to_string()))
    }

    /// Dataset dimensions (D, C, n) without materializing samples. CSV
    /// datasets read the file.
    pub fn dataset_shape(&self) -> Result<(usize, usize, usize)> {
        match self.dataset.kind {
            DatasetKind::Synthetic => {
                let s = self.dataset.synth()?;
                Ok((s.feature_dim, s.classes, s.n_samples))
            }
            DatasetKind::Csv => {
                let d = crate::data::load_csv(self.dataset.csv_path()?)?;
                Ok((d.feature_dim(), d.classes(), d.len()))
            }
        }
    }

    /// Expand the zoo section against the dataset dimensions.
    pub fn resolve_zoo(&self) -> Result<Zoo> {
        let (d, c, _) = self.dataset_shape()?;
        let zoo = match (&self.zoo.references, &self.zoo.target) {
            (None, None) => default_zoo(d, c)?,
            (Some(refs), Some(target)) => Zoo {
                references: refs.clone(),
                target: target.clone(),
            },
            _ => {
                return Err(Error::config(
                    "zoo",
                    "provide both `references` and `target`, or neither",
                ))
            }
        };
        zoo.validate()?;
        if zoo.target.input_dim != d || zoo.target.output_dim != c {
            return Err(Error::config(
                "zoo.target",
                format!(
                    "model is {}->{} but the dataset is {}-dimensional with {} classes",
                    zoo.target.input_dim, zoo.target.output_dim, d, c
                ),
            ));
        }
        Ok(zoo)
    }

    pub fn arms(&self) -> Result<Vec<Arm>> {
        let mut arms = Vec::with_capacity(self.eval.arms.len());
        for slug in &self.eval.arms {
            let arm = Arm::from_slug(slug).ok_or_else(|| {
                Error::config(
                    "eval.arms",
                    format!("unknown arm `{slug}` (expected b, b-modl, b-knns, b-modl-knns)"),
                )
            })?;
            if !arms.contains(&arm) {
                arms.push(arm);
            }
        }
        if arms.is_empty() {
            return Err(Error::config("eval.arms", "at least one arm is required"));
        }
        Ok(arms)
    }

    /// Full schema plus cross-field validation; no training compute.
    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.train.validate()?;
        let _ = self.arms()?;
        if self.eval.seeds.is_empty() {
            return Err(Error::config("eval.seeds", "at least one seed is required"));
        }
        for &k in &self.eval.k_sweep {
            if k == 0 {
                return Err(Error::config("eval.k_sweep", "K values must be positive"));
            }
        }

        let (_, _, n) = self.dataset_shape()?;
        let train_size = (self.dataset.split[0] * n as f64).floor() as usize;
        if train_size < 2 {
            return Err(Error::config(
                "dataset.split",
                format!("train split of {train_size} samples is too small"),
            ));
        }
        if self.train.k >= train_size {
            return Err(Error::config(
                "train.k",
                format!(
                    "K={} needs at least K+1 training samples, but the train split has {}; \
                     lower K to at most {}",
                    self.train.k,
                    train_size,
                    train_size - 1
                ),
            ));
        }
        for &k in &self.eval.k_sweep {
            if k >= train_size {
                return Err(Error::config(
                    "eval.k_sweep",
                    format!(
                        "K={k} exceeds the train split ({train_size} samples); lower it to at most {}",
                        train_size - 1
                    ),
                ));
            }
        }
        self.resolve_zoo()?;
        Ok(())
    }

    /// Stable hash of everything that determines a run's outputs.
    pub fn content_hash(&self) -> u64 {
        let mut h = crate::bytes::Fnv1a::new();
        h.update_str(&self.to_toml().unwrap_or_default());
        h.finish()
    }

    /// A ready-to-edit default config: the synthetic noisy-label benchmark.
    /// The large test fraction keeps AUC estimates stable at desk scale.
    pub fn example() -> Self {
        ExperimentConfig {
            dataset: DatasetSection {
                kind: DatasetKind::Synthetic,
                path: None,
                n_samples: Some(4000),
                feature_dim: Some(32),
                classes: Some(5),
                flip_rate: 0.2,
                uncertain_fraction: 0.15,
                separation: 2.5,
                seed: 7,
                split: [0.35, 0.15, 0.5],
                split_seed: 11,
            },
            zoo: ZooSection::default(),
            train: TrainConfig::default(),
            eval: EvalSection::default(),
            workers: 0,
            output_dir: None,
        }
    }
}
