//! Datasets: synthetic noisy multi-label generation, CSV label files in the
//! four-state positive/negative/uncertain/unmentioned convention, and
//! deterministic splits.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bytes::Fnv1a;
use crate::error::{Error, Result};
use crate::tensor::sigmoid;

/// One label slot as mined from reports: the four-state convention used by
/// chest X-ray label files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawLabel {
    Positive,
    Negative,
    Uncertain,
    Unmentioned,
}

impl fmt::Display for RawLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RawLabel::Positive => "1",
            RawLabel::Negative => "0",
            RawLabel::Uncertain => "-1",
            RawLabel::Unmentioned => "",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: u64,
    pub features: Vec<f64>,
    pub raw_labels: Vec<RawLabel>,
    /// Ground-truth class probabilities; synthetic datasets only.
    pub true_probs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Synthetic(SynthConfig),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub class_names: Vec<String>,
    pub provenance: Provenance,
}

/// Synthetic generator settings. Each class gets a random prototype
/// direction; true probabilities are the sigmoid of the scaled
/// feature-prototype alignment, and label noise is injected as independent
/// flips followed by independent uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub feature_dim: usize,
    pub classes: usize,
    pub flip_rate: f64,
    pub uncertain_fraction: f64,
    pub separation: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.feature_dim == 0 || self.classes == 0 {
            return Err(Error::config("dataset", "n_samples, feature_dim, and classes must be positive"));
        }
        for (name, p) in [
            ("flip_rate", self.flip_rate),
            ("uncertain_fraction", self.uncertain_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(name, format!("{p} is not a probability")));
            }
        }
        if self.flip_rate + self.uncertain_fraction > 1.0 {
            return Err(Error::config(
                "flip_rate",
                "flip_rate + uncertain_fraction must not exceed 1",
            ));
        }
        if self.separation <= 0.0 {
            return Err(Error::config("separation", "must be positive"));
        }
        Ok(())
    }
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    /// All features as one `n x D` row-major block, in sample order.
    pub fn feature_matrix(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * self.feature_dim());
        for s in &self.samples {
            out.extend_from_slice(&s.features);
        }
        out
    }

    /// Content hash over ids, features, labels, and class names. Keys the
    /// stage-1 cache.
    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.update_u64(self.len() as u64);
        h.update_u64(self.classes() as u64);
        for name in &self.class_names {
            h.update_str(name);
        }
        for s in &self.samples {
            h.update_u64(s.id);
            for &f in &s.features {
                h.update_f64(f);
            }
            for &l in &s.raw_labels {
                h.update(&[match l {
                    RawLabel::Positive => 1,
                    RawLabel::Negative => 2,
                    RawLabel::Uncertain => 3,
                    RawLabel::Unmentioned => 4,
                }]);
            }
            if let Some(tp) = &s.true_probs {
                for &p in tp {
                    h.update_f64(p);
                }
            }
        }
        h.finish()
    }
}

/// Samples per feature cluster (on average). The generator scatters tight
/// clusters in feature space so that label noise cannot be averaged away at
/// a single location: a model sees only a few noisy labels per cluster,
/// while similar samples elsewhere carry the signal.
const CLUSTER_SIZE: usize = 3;
/// Cluster jitter radius, small against the margin below.
const CLUSTER_RADIUS: f64 = 0.1;

/// Generate a synthetic noisy multi-label dataset. Deterministic for a given
/// config: one RNG stream drawn in a fixed order (class prototypes, cluster
/// centers, per-sample jitter, flips, then uncertainty).
///
/// Features are drawn as many small clusters whose centers keep a margin
/// from every class boundary, so each cluster is label-pure before noise.
/// True probabilities are the sigmoid of the scaled feature-prototype
/// alignment; clean labels threshold them at 0.5.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (n, d, c) = (config.n_samples, config.feature_dim, config.classes);

    // Unit prototype direction per class.
    let mut prototypes = Vec::with_capacity(c);
    for _ in 0..c {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        v.iter_mut().for_each(|x| *x /= norm);
        prototypes.push(v);
    }

    // Cluster centers by rejection: every class alignment stays outside a
    // margin band around the boundary, so clusters do not straddle it.
    let margin = 0.8 / (c as f64).sqrt();
    let cluster_count = n.div_ceil(CLUSTER_SIZE);
    let mut centers = Vec::with_capacity(cluster_count);
    for _ in 0..cluster_count {
        let mut attempts = 0;
        let center = loop {
            let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let clears_margin = prototypes.iter().all(|proto| {
                let dot: f64 = v.iter().zip(proto).map(|(a, b)| a * b).sum();
                dot.abs() >= margin
            });
            if clears_margin {
                break v;
            }
            attempts += 1;
            if attempts > 10_000 {
                return Err(Error::config(
                    "classes",
                    "could not place cluster centers clear of every class boundary",
                ));
            }
        };
        centers.push(center);
    }

    let mut features = Vec::with_capacity(n);
    for i in 0..n {
        let center = &centers[i % cluster_count];
        let v: Vec<f64> = center
            .iter()
            .map(|&cv| cv + CLUSTER_RADIUS * rng.sample::<f64, _>(StandardNormal))
            .collect();
        features.push(v);
    }

    let mut samples: Vec<Sample> = features
        .into_iter()
        .enumerate()
        .map(|(i, feats)| {
            let true_probs: Vec<f64> = prototypes
                .iter()
                .map(|proto| {
                    let dot: f64 = feats.iter().zip(proto).map(|(a, b)| a * b).sum();
                    sigmoid(config.separation * dot)
                })
                .collect();
            let raw_labels: Vec<RawLabel> = true_probs
                .iter()
                .map(|&p| {
                    if p >= 0.5 {
                        RawLabel::Positive
                    } else {
                        RawLabel::Negative
                    }
                })
                .collect();
            Sample {
                id: i as u64,
                features: feats,
                raw_labels,
                true_probs: Some(true_probs),
            }
        })
        .collect();

    for s in samples.iter_mut() {
        for l in s.raw_labels.iter_mut() {
            if rng.random::<f64>() < config.flip_rate {
                *l = match *l {
                    RawLabel::Positive => RawLabel::Negative,
                    RawLabel::Negative => RawLabel::Positive,
                    other => other,
                };
            }
        }
    }
    for s in samples.iter_mut() {
        for l in s.raw_labels.iter_mut() {
            if rng.random::<f64>() < config.uncertain_fraction {
                *l = RawLabel::Uncertain;
            }
        }
    }

    Ok(Dataset {
        samples,
        class_names: (0..c).map(|i| format!("class{i}")).collect(),
        provenance: Provenance::Synthetic(config.clone()),
    })
}

fn parse_label(token: &str) -> Option<RawLabel> {
    match token.trim() {
        "1" => Some(RawLabel::Positive),
        "0" => Some(RawLabel::Negative),
        "-1" => Some(RawLabel::Uncertain),
        "" => Some(RawLabel::Unmentioned),
        _ => None,
    }
}

/// Load a label CSV: header `id,f0..f{D-1},<class names...>`, one row per
/// sample, label values in {1, 0, -1, empty}.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_error(path, 0, "<file>", e.to_string()))?;

    let headers = reader
        .headers()
        .map_err(|e| csv_error(path, 0, "<header>", e.to_string()))?
        .clone();
    let cols: Vec<String> = headers.iter().map(|s| s.to_string()).collect();
    if cols.first().map(String::as_str) != Some("id") {
        return Err(csv_error(path, 0, "id", "first column must be `id`"));
    }
    let feature_count = cols[1..]
        .iter()
        .take_while(|c| is_feature_column(c))
        .count();
    for (i, c) in cols[1..1 + feature_count].iter().enumerate() {
        if *c != format!("f{i}") {
            return Err(csv_error(
                path,
                0,
                c,
                format!("feature columns must be consecutive f0..; found `{c}` at position {i}"),
            ));
        }
    }
    let class_names: Vec<String> = cols[1 + feature_count..].to_vec();
    if class_names.iter().any(|c| is_feature_column(c)) {
        return Err(csv_error(path, 0, "<header>", "feature columns must precede class columns"));
    }
    if class_names.is_empty() {
        return Err(csv_error(path, 0, "<header>", "no class columns found"));
    }

    let mut samples = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let row = row_idx + 1; // 1-based data row, header is row 0
        let record = record.map_err(|e| csv_error(path, row, "<row>", e.to_string()))?;
        if record.len() != cols.len() {
            return Err(csv_error(
                path,
                row,
                "<row>",
                format!("expected {} fields, got {}", cols.len(), record.len()),
            ));
        }
        let id: u64 = record[0]
            .trim()
            .parse()
            .map_err(|_| csv_error(path, row, "id", format!("bad id `{}`", &record[0])))?;
        let mut features = Vec::with_capacity(feature_count);
        for i in 0..feature_count {
            let raw = &record[1 + i];
            let v: f64 = raw.trim().parse().map_err(|_| {
                csv_error(path, row, &cols[1 + i], format!("bad feature value `{raw}`"))
            })?;
            features.push(v);
        }
        let mut raw_labels = Vec::with_capacity(class_names.len());
        for (i, class) in class_names.iter().enumerate() {
            let token = &record[1 + feature_count + i];
            let label = parse_label(token).ok_or_else(|| {
                csv_error(path, row, class, format!("unknown label token `{token}`"))
            })?;
            raw_labels.push(label);
        }
        samples.push(Sample {
            id,
            features,
            raw_labels,
            true_probs: None,
        });
    }

    let mut seen = std::collections::HashSet::new();
    for s in &samples {
        if !seen.insert(s.id) {
            return Err(csv_error(path, 0, "id", format!("duplicate id {}", s.id)));
        }
    }

    Ok(Dataset {
        samples,
        class_names,
        provenance: Provenance::File(path.to_path_buf()),
    })
}

fn is_feature_column(name: &str) -> bool {
    name.strip_prefix('f')
        .is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
}

fn csv_error(path: &Path, row: usize, column: &str, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        row,
        column: column.to_string(),
        reason: reason.into(),
    }
}

/// Write a dataset in the [`load_csv`] format. `true_probs` are not part of
/// the format; see [`write_true_probs_csv`] for the oracle sidecar.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("id");
    for i in 0..dataset.feature_dim() {
        out.push_str(&format!(",f{i}"));
    }
    for name in &dataset.class_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for s in &dataset.samples {
        out.push_str(&s.id.to_string());
        for f in &s.features {
            out.push_str(&format!(",{f}"));
        }
        for l in &s.raw_labels {
            out.push_str(&format!(",{l}"));
        }
        out.push('\n');
    }
    crate::bytes::write_atomic(path, out.as_bytes())
}

/// Sidecar with the generator's ground-truth probabilities, for oracle checks.
pub fn write_true_probs_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("id");
    for name in &dataset.class_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for s in &dataset.samples {
        let probs = s
            .true_probs
            .as_ref()
            .ok_or_else(|| Error::contract("dataset has no true_probs to export"))?;
        out.push_str(&s.id.to_string());
        for p in probs {
            out.push_str(&format!(",{p}"));
        }
        out.push('\n');
    }
    crate::bytes::write_atomic(path, out.as_bytes())
}

/// Deterministic three-way split with largest-remainder rounding, ties broken
/// toward the earlier split (train first).
pub fn split(
    dataset: &Dataset,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let n = dataset.len();
    if n < 3 {
        return Err(Error::contract(format!("cannot split {n} samples three ways")));
    }
    let fracs = [fractions.0, fractions.1, fractions.2];
    if fracs.iter().any(|&f| f <= 0.0) {
        return Err(Error::config("split", "fractions must be positive"));
    }
    if (fracs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::config("split", "fractions must sum to 1"));
    }

    // Largest-remainder apportionment.
    let exact: Vec<f64> = fracs.iter().map(|f| f * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|&e| e.floor() as usize).collect();
    let mut leftover = n - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if leftover == 0 {
            break;
        }
        sizes[i] += 1;
        leftover -= 1;
    }

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);

    let take = |range: std::ops::Range<usize>| -> Dataset {
        Dataset {
            samples: range.map(|i| dataset.samples[indices[i]].clone()).collect(),
            class_names: dataset.class_names.clone(),
            provenance: dataset.provenance.clone(),
        }
    };
    let train = take(0..sizes[0]);
    let valid = take(sizes[0]..sizes[0] + sizes[1]);
    let test = take(sizes[0] + sizes[1]..n);
    Ok((train, valid, test))
}
