//! Two-stage training.
//!
//! Stage 1 trains each reference model with the masked classification loss
//! alone. Stage 2 freezes the references, averages their predictions into
//! the soft label distribution, precomputes the neighbor pool, and trains the
//! target with the combined objective: classification plus the weighted
//! distribution and neighbor smoothing terms. One `fit` engine drives both
//! stages, so a target trained with both auxiliary weights at zero follows
//! the baseline trajectory bit for bit.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::adam::{adam_step, AdamState};
use crate::bytes::derive_seed;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalTargets};
use crate::graph::Graph;
use crate::labels::{
    aggregate_soft_labels, resolve, LabelPolicy, ReferencePredictions, SoftLabelDistribution,
};
use crate::losses::{
    bce_loss_node, check_coverage, combine_loss_nodes, distribution_loss_node,
    gather_neighbor_batch, neighbor_loss_node, neighbor_loss_node_raw, LossWeights,
};
use crate::neighbors::{build_neighbor_pool, NeighborPool};
use crate::net::{forward, forward_on_graph, ModelSpec, ParamNodes, Parameters};
use crate::tensor::Tensor;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SEED_TAG_LABELS: u64 = 1;
const SEED_TAG_SHUFFLE: u64 = 2;

/// Every training hyperparameter in one place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda: f64,
    pub gamma: f64,
    pub k: usize,
    pub sigma: f64,
    pub policy: LabelPolicy,
    /// Stage-2 override for the uncertainty policy; stage 1's policy is
    /// reused when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_policy: Option<LabelPolicy>,
    pub base_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub seed: u64,
    pub stop_neighbor_gradient: bool,
    /// Normalize each anchor's K similarity weights to sum to one inside the
    /// neighbor loss (convex combination); disable for the literal weighted
    /// sum.
    pub normalize_neighbor_weights: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 0.1,
            gamma: 0.1,
            k: 9,
            sigma: 1.0,
            policy: LabelPolicy::UOnes,
            target_policy: None,
            base_lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            batch_size: 32,
            epochs: 10,
            lr_decay_factor: 3.0,
            lr_decay_every: 2,
            seed: 0,
            stop_neighbor_gradient: false,
            normalize_neighbor_weights: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        LossWeights { lambda: self.lambda, gamma: self.gamma }.validate()?;
        self.policy.validate()?;
        if let Some(p) = self.target_policy {
            p.validate()?;
        }
        if self.k == 0 {
            return Err(Error::config("k", "must be at least 1"));
        }
        if self.sigma <= 0.0 {
            return Err(Error::config("sigma", "must be positive"));
        }
        if self.base_lr <= 0.0 {
            return Err(Error::config("base_lr", "must be positive"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(name, format!("{b} must be in [0, 1)")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs", "must be positive"));
        }
        if self.lr_decay_factor <= 0.0 {
            return Err(Error::config("lr_decay_factor", "must be positive"));
        }
        if self.lr_decay_every == 0 {
            return Err(Error::config("lr_decay_every", "must be positive"));
        }
        Ok(())
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights { lambda: self.lambda, gamma: self.gamma }
    }

    /// Learning rate at `epoch` under this config's decay settings.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.base_lr / self.lr_decay_factor.powi((epoch / self.lr_decay_every) as i32)
    }

    /// Hash over the fields stage 1 depends on. The auxiliary loss weights,
    /// K, and sigma are excluded on purpose: changing them must not
    /// invalidate cached reference checkpoints.
    pub fn stage1_hash(&self) -> u64 {
        let mut h = crate::bytes::Fnv1a::new();
        h.update_str(&format!("{:?}", self.policy));
        h.update_f64(self.base_lr);
        h.update_f64(self.beta1);
        h.update_f64(self.beta2);
        h.update_u64(self.batch_size as u64);
        h.update_u64(self.epochs as u64);
        h.update_f64(self.lr_decay_factor);
        h.update_u64(self.lr_decay_every as u64);
        h.update_u64(self.seed);
        h.finish()
    }
}

/// Step decay: the base rate divided by 3 for every two completed epochs.
pub fn lr_schedule(base_lr: f64, epoch: usize) -> f64 {
    base_lr / 3.0f64.powi((epoch / 2) as i32)
}

/// One row of the step-level training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossLogRow {
    pub epoch: usize,
    pub step: usize,
    pub cls: f64,
    pub distri: f64,
    pub neigh: f64,
    pub total: f64,
    pub lr: f64,
}

/// Per-epoch training summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_cls: f64,
    pub mean_total: f64,
    pub valid_mean_auc: Option<f64>,
    pub lr: f64,
}

/// Result of training one model: the best-validation checkpoint plus the
/// full history and step log.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best_params: Parameters,
    pub best_epoch: usize,
    pub best_valid_auc: Option<f64>,
    pub history: Vec<EpochRecord>,
    pub loss_log: Vec<LossLogRow>,
    /// Set when training stopped early on a non-finite loss; the checkpoint
    /// is the last finite one.
    pub aborted: bool,
}

/// Frozen stage-2 inputs.
pub struct DistillInputs<'a> {
    pub soft: &'a SoftLabelDistribution,
    pub pool: &'a NeighborPool,
}

/// Train one reference model on the classification loss alone.
pub fn train_reference(
    train: &Dataset,
    valid: &Dataset,
    spec: &ModelSpec,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    fit(train, valid, spec, config, None)
}

/// Predict with every trained reference over the training split, average
/// into the soft label distribution, and build the neighbor pool from it.
pub fn distill_setup(
    references: &[(ModelSpec, Parameters)],
    train: &Dataset,
    config: &TrainConfig,
) -> Result<(SoftLabelDistribution, NeighborPool)> {
    if references.is_empty() {
        return Err(Error::contract("distill_setup needs at least one reference"));
    }
    let features = Tensor::matrix(train.len(), train.feature_dim(), train.feature_matrix())?;
    let predictions = references
        .iter()
        .map(|(spec, params)| {
            let probs = forward(spec, params, &features)?;
            Ok(ReferencePredictions {
                model_name: spec.name.clone(),
                model_hash: spec.hash(),
                probs: probs.data().to_vec(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<u64> = train.samples.iter().map(|s| s.id).collect();
    let soft = aggregate_soft_labels(&predictions, &ids, train.classes())?;
    let pool = build_neighbor_pool(&soft, config.k, config.sigma)?;
    Ok((soft, pool))
}

/// Train the target model with the full combined objective against frozen
/// soft labels and a frozen neighbor pool.
pub fn train_target(
    train: &Dataset,
    valid: &Dataset,
    spec: &ModelSpec,
    soft: &SoftLabelDistribution,
    pool: &NeighborPool,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let ids: Vec<u64> = train.samples.iter().map(|s| s.id).collect();
    check_coverage(&ids, soft, pool)?;
    fit(train, valid, spec, config, Some(DistillInputs { soft, pool }))
}

fn fit(
    train: &Dataset,
    valid: &Dataset,
    spec: &ModelSpec,
    config: &TrainConfig,
    distill: Option<DistillInputs<'_>>,
) -> Result<TrainOutcome> {
    config.validate()?;
    spec.validate()?;
    if train.is_empty() || valid.is_empty() {
        return Err(Error::contract("fit needs non-empty train and valid splits"));
    }
    let weights = config.weights();
    let use_distri = distill.is_some() && weights.lambda > 0.0;
    let use_neigh = distill.is_some() && weights.gamma > 0.0;

    let policy = match (&distill, config.target_policy) {
        (Some(_), Some(p)) => p,
        _ => config.policy,
    };
    let targets = resolve(train, policy, derive_seed(config.seed, SEED_TAG_LABELS))?;
    let valid_targets = EvalTargets::from_raw_labels(valid);
    let classes = train.classes();
    let dim = train.feature_dim();

    // Stage-2 lookups: soft rows by sample id, neighbor features by id.
    let (soft_rows, pool_index, features_by_id) = match (&distill, use_distri || use_neigh) {
        (Some(d), true) => {
            let soft_index: HashMap<u64, usize> = d
                .soft
                .sample_ids
                .iter()
                .enumerate()
                .map(|(i, &id)| (id, i))
                .collect();
            let rows: Vec<&[f64]> = train
                .samples
                .iter()
                .map(|s| {
                    let idx = soft_index
                        .get(&s.id)
                        .ok_or_else(|| {
                            Error::config("soft-labels", format!("no soft label row for sample {}", s.id))
                        })?;
                    Ok(d.soft.row(*idx))
                })
                .collect::<Result<Vec<_>>>()?;
            let pool_index = d.pool.id_index();
            let by_id: HashMap<u64, Vec<f64>> = train
                .samples
                .iter()
                .map(|s| (s.id, s.features.clone()))
                .collect();
            (rows, pool_index, by_id)
        }
        _ => (Vec::new(), HashMap::new(), HashMap::new()),
    };

    let mut params = Parameters::init(spec)?;
    let mut adam = AdamState::new(&params, config.beta1, config.beta2);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, SEED_TAG_SHUFFLE));

    let mut history = Vec::with_capacity(config.epochs);
    let mut loss_log = Vec::new();
    let mut best: Option<(Parameters, usize, Option<f64>)> = None;
    let mut aborted = false;

    'epochs: for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut shuffle_rng);

        let mut cls_sum = 0.0;
        let mut total_sum = 0.0;
        let mut batches = 0usize;

        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            let mut feats = Vec::with_capacity(batch.len() * dim);
            let mut values = Vec::with_capacity(batch.len() * classes);
            let mut mask = Vec::with_capacity(batch.len() * classes);
            let mut batch_ids = Vec::with_capacity(batch.len());
            for &row in batch {
                feats.extend_from_slice(&train.samples[row].features);
                values.extend_from_slice(targets.value_row(row));
                mask.extend_from_slice(targets.mask_row(row));
                batch_ids.push(train.samples[row].id);
            }

            let mut g = Graph::new();
            let nodes = ParamNodes::register(&mut g, &params);
            let x = g.value(Tensor::matrix(batch.len(), dim, feats)?);
            let preds = forward_on_graph(&mut g, spec, &nodes, x)?;
            let cls = bce_loss_node(&mut g, preds, &values, &mask)?;

            let distri = if use_distri {
                let mut soft_batch = Vec::with_capacity(batch.len() * classes);
                for &row in batch {
                    soft_batch.extend_from_slice(soft_rows[row]);
                }
                Some(distribution_loss_node(&mut g, preds, &soft_batch)?)
            } else {
                None
            };

            let neigh = if use_neigh {
                let pool = distill.as_ref().expect("neigh implies distill").pool;
                let (nfeats, sims) =
                    gather_neighbor_batch(&batch_ids, pool, &pool_index, &features_by_id, dim)?;
                let nx = g.value(Tensor::matrix(batch.len() * pool.k, dim, nfeats)?);
                let npreds = forward_on_graph(&mut g, spec, &nodes, nx)?;
                let node = if config.normalize_neighbor_weights {
                    neighbor_loss_node(&mut g, preds, npreds, &sims, pool.k, config.stop_neighbor_gradient)?
                } else {
                    neighbor_loss_node_raw(&mut g, preds, npreds, &sims, pool.k, config.stop_neighbor_gradient)?
                };
                Some(node)
            } else {
                None
            };

            let total = combine_loss_nodes(&mut g, cls, distri, neigh, &weights)?;
            let total_value = g.output(total).item();
            if !total_value.is_finite() {
                log::warn!(
                    "training `{}` diverged at epoch {epoch} step {step}; keeping last finite checkpoint",
                    spec.name
                );
                aborted = true;
                break 'epochs;
            }

            let cls_value = g.output(cls).item();
            let distri_value = distri.map_or(0.0, |d| g.output(d).item());
            let neigh_value = neigh.map_or(0.0, |n| g.output(n).item());
            loss_log.push(LossLogRow {
                epoch,
                step,
                cls: cls_value,
                distri: distri_value,
                neigh: neigh_value,
                total: total_value,
                lr,
            });
            cls_sum += cls_value;
            total_sum += total_value;
            batches += 1;

            let grads = g.backward(total)?;
            let grad_tensors = nodes.gradients(&g, &grads);
            if let Err(e) = adam_step(&mut params, &grad_tensors, &mut adam, lr) {
                log::warn!("training `{}` aborted: {e}", spec.name);
                aborted = true;
                break 'epochs;
            }
        }

        let report = evaluate(spec, &params, valid, &valid_targets)?;
        let record = EpochRecord {
            epoch,
            mean_cls: cls_sum / batches.max(1) as f64,
            mean_total: total_sum / batches.max(1) as f64,
            valid_mean_auc: report.mean_auc,
            lr,
        };
        history.push(record);

        let better = match (&best, report.mean_auc) {
            (None, _) => true,
            (Some((_, _, None)), Some(_)) => true,
            (Some((_, _, Some(prev))), Some(cur)) => cur > *prev,
            (Some(_), None) => false,
        };
        if better {
            best = Some((params.clone(), epoch, report.mean_auc));
        }
    }

    let (best_params, best_epoch, best_valid_auc) = match best {
        Some(b) => b,
        // Divergence before the first validation point: the current (last
        // finite) parameters are the checkpoint.
        None => (params, 0, None),
    };
    Ok(TrainOutcome {
        best_params,
        best_epoch,
        best_valid_auc,
        history,
        loss_log,
        aborted,
    })
}
