//! Label resolution and soft-label aggregation.
//!
//! Raw four-state labels become trainable targets under an uncertainty
//! policy; averaged reference-model predictions become the fixed soft label
//! distribution that drives the distribution loss and the neighbor pool.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bytes::{self, Cursor, Payload};
use crate::data::{Dataset, RawLabel};
use crate::error::{Error, Result};

const SOFT_LABEL_MAGIC: &[u8; 8] = b"MODLSFT1";

/// How Uncertain labels are mapped before training. The label-smoothing
/// variants draw a uniform value from `[low, high)` per uncertain slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LabelPolicy {
    /// Exclude uncertain slots from the classification loss.
    UIgnore,
    /// Map uncertain to positive.
    UOnes,
    /// Map uncertain to negative.
    UZeros,
    /// Map uncertain to a random value close to one.
    LsrOnes { low: f64, high: f64 },
    /// Map uncertain to a random value close to zero.
    LsrZeros { low: f64, high: f64 },
}

impl LabelPolicy {
    /// Default smoothing bounds when a config names the policy without them.
    pub fn lsr_ones_default() -> Self {
        LabelPolicy::LsrOnes { low: 0.55, high: 0.85 }
    }

    pub fn lsr_zeros_default() -> Self {
        LabelPolicy::LsrZeros { low: 0.0, high: 0.3 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LabelPolicy::UIgnore | LabelPolicy::UOnes | LabelPolicy::UZeros => Ok(()),
            LabelPolicy::LsrOnes { low, high } => {
                check_bounds(low, high)?;
                if low < 0.5 {
                    return Err(Error::config(
                        "policy",
                        format!("lsr-ones bounds must stay near one (low {low} < 0.5)"),
                    ));
                }
                Ok(())
            }
            LabelPolicy::LsrZeros { low, high } => {
                check_bounds(low, high)?;
                if high > 0.5 {
                    return Err(Error::config(
                        "policy",
                        format!("lsr-zeros bounds must stay near zero (high {high} > 0.5)"),
                    ));
                }
                Ok(())
            }
        }
    }
}

fn check_bounds(low: f64, high: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&low) || !(0.0..=1.0).contains(&high) || low >= high {
        return Err(Error::config(
            "policy",
            format!("smoothing bounds must satisfy 0 <= low < high <= 1, got ({low}, {high})"),
        ));
    }
    Ok(())
}

/// Per-sample per-class training targets with a mask; masked-out slots carry
/// no loss and no gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedTargets {
    pub classes: usize,
    /// `n x C` row-major target values in [0, 1].
    pub values: Vec<f64>,
    /// `n x C` row-major inclusion mask.
    pub mask: Vec<bool>,
}

impl ResolvedTargets {
    pub fn rows(&self) -> usize {
        self.values.len().checked_div(self.classes).unwrap_or(0)
    }

    pub fn value_row(&self, r: usize) -> &[f64] {
        &self.values[r * self.classes..(r + 1) * self.classes]
    }

    pub fn mask_row(&self, r: usize) -> &[bool] {
        &self.mask[r * self.classes..(r + 1) * self.classes]
    }
}

/// Map raw labels to targets: Positive -> 1, Negative and Unmentioned -> 0,
/// Uncertain per policy. Deterministic per seed; randomness is consumed only
/// by uncertain slots under the smoothing policies.
pub fn resolve(dataset: &Dataset, policy: LabelPolicy, seed: u64) -> Result<ResolvedTargets> {
    policy.validate()?;
    let classes = dataset.classes();
    let mut values = Vec::with_capacity(dataset.len() * classes);
    let mut mask = Vec::with_capacity(dataset.len() * classes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for sample in &dataset.samples {
        for &label in &sample.raw_labels {
            let (v, m) = match label {
                RawLabel::Positive => (1.0, true),
                RawLabel::Negative | RawLabel::Unmentioned => (0.0, true),
                RawLabel::Uncertain => match policy {
                    LabelPolicy::UIgnore => (0.0, false),
                    LabelPolicy::UOnes => (1.0, true),
                    LabelPolicy::UZeros => (0.0, true),
                    LabelPolicy::LsrOnes { low, high } | LabelPolicy::LsrZeros { low, high } => {
                        (rng.random_range(low..high), true)
                    }
                },
            };
            values.push(v);
            mask.push(m);
        }
    }
    Ok(ResolvedTargets { classes, values, mask })
}

/// Prediction grid of one reference model over a dataset.
#[derive(Debug, Clone)]
pub struct ReferencePredictions {
    pub model_name: String,
    pub model_hash: u64,
    /// `n x C` row-major probabilities in (0, 1).
    pub probs: Vec<f64>,
}

/// The fixed per-sample soft label distribution: elementwise arithmetic mean
/// of the reference predictions, tagged with its sources.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabelDistribution {
    pub classes: usize,
    pub sample_ids: Vec<u64>,
    /// `n x C` row-major values.
    pub values: Vec<f64>,
    /// Hashes of the contributing reference models.
    pub source_hashes: Vec<u64>,
}

impl SoftLabelDistribution {
    pub fn len(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_ids.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.classes..(r + 1) * self.classes]
    }

    pub fn content_hash(&self) -> u64 {
        let mut h = bytes::Fnv1a::new();
        h.update_u64(self.classes as u64);
        for &id in &self.sample_ids {
            h.update_u64(id);
        }
        for &v in &self.values {
            h.update_f64(v);
        }
        for &s in &self.source_hashes {
            h.update_u64(s);
        }
        h.finish()
    }
}

/// Average reference predictions elementwise over the model axis.
pub fn aggregate_soft_labels(
    predictions: &[ReferencePredictions],
    sample_ids: &[u64],
    classes: usize,
) -> Result<SoftLabelDistribution> {
    if predictions.is_empty() {
        return Err(Error::contract("aggregate_soft_labels requires at least one model"));
    }
    let expected = sample_ids.len() * classes;
    for p in predictions {
        if p.probs.len() != expected {
            return Err(Error::shape(
                "aggregate_soft_labels",
                format!(
                    "model `{}` produced {} values, expected {}",
                    p.model_name,
                    p.probs.len(),
                    expected
                ),
            ));
        }
    }
    let inv = 1.0 / predictions.len() as f64;
    let mut values = vec![0.0; expected];
    for p in predictions {
        for (acc, &v) in values.iter_mut().zip(&p.probs) {
            *acc += v;
        }
    }
    for v in values.iter_mut() {
        *v *= inv;
    }
    Ok(SoftLabelDistribution {
        classes,
        sample_ids: sample_ids.to_vec(),
        values,
        source_hashes: predictions.iter().map(|p| p.model_hash).collect(),
    })
}

/// Persist a soft label distribution: header (sample count, class count,
/// source model hashes), little-endian values, trailing checksum.
pub fn write_soft_labels(dist: &SoftLabelDistribution, path: &Path) -> Result<()> {
    let mut p = Payload::new();
    p.put_u64(dist.len() as u64);
    p.put_u32(dist.classes as u32);
    p.put_u32(dist.source_hashes.len() as u32);
    for &h in &dist.source_hashes {
        p.put_u64(h);
    }
    for &id in &dist.sample_ids {
        p.put_u64(id);
    }
    p.put_f64_slice(&dist.values);
    bytes::write_framed(path, SOFT_LABEL_MAGIC, &p.into_bytes())
}

pub fn read_soft_labels(path: &Path) -> Result<SoftLabelDistribution> {
    let payload = bytes::read_framed(path, SOFT_LABEL_MAGIC)?;
    let mut c = Cursor::new(path, &payload);
    let n = c.get_u64()? as usize;
    let classes = c.get_u32()? as usize;
    let n_sources = c.get_u32()? as usize;
    let mut source_hashes = Vec::with_capacity(n_sources);
    for _ in 0..n_sources {
        source_hashes.push(c.get_u64()?);
    }
    let mut sample_ids = Vec::with_capacity(n);
    for _ in 0..n {
        sample_ids.push(c.get_u64()?);
    }
    let values = c.get_f64_vec(n * classes)?;
    c.expect_end()?;
    Ok(SoftLabelDistribution {
        classes,
        sample_ids,
        values,
        source_hashes,
    })
}
