//! Loss terms: masked binary cross-entropy, the soft-label distribution loss,
//! the neighbor smoothing loss, and their weighted combination.
//!
//! Multi-label sigmoid outputs are not a normalized distribution over
//! classes, so the distribution and neighbor losses decompose into per-class
//! Bernoulli KL divergences (including the `1 - p` term) summed over classes;
//! the literal cross term alone could go negative. Fixed label coefficients
//! follow the `0 * log 0 = 0` limit convention so hard 0/1 targets produce
//! exact values, while predictions are always clamped before logs.
//!
//! Every term has a plain scalar form and a graph form; the graph forms are
//! what training differentiates. All batch reductions are means so the loss
//! weights stay batch-size independent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, PROB_CLAMP};
use crate::labels::SoftLabelDistribution;
use crate::neighbors::NeighborPool;
use crate::tensor::Tensor;

/// Weights of the auxiliary terms in the total objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda: f64,
    pub gamma: f64,
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("gamma", self.gamma)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(name, format!("{v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { lambda: 0.1, gamma: 0.1 }
    }
}

/// One training step's loss components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub cls: f64,
    pub distri: f64,
    pub neigh: f64,
    pub total: f64,
}

/// `total = cls + lambda * distri + gamma * neigh`.
pub fn total_loss(cls: f64, distri: f64, neigh: f64, w: &LossWeights) -> Result<LossBreakdown> {
    w.validate()?;
    for (name, v) in [("cls", cls), ("distri", distri), ("neigh", neigh)] {
        if !v.is_finite() {
            return Err(Error::contract(format!("{name} component is not finite: {v}")));
        }
    }
    Ok(LossBreakdown {
        cls,
        distri,
        neigh,
        total: cls + w.lambda * distri + w.gamma * neigh,
    })
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Per-class Bernoulli KL of target `l` relative to prediction `p`, with `p`
/// clamped and the `0 log 0` convention on the target side.
pub fn bernoulli_kl(l: f64, p: f64) -> f64 {
    let p = clamp_prob(p);
    xlogy(l, l / p) + xlogy(1.0 - l, (1.0 - l) / (1.0 - p))
}

/// Masked BCE: mean over masked-in slots of `-[y ln p + (1-y) ln(1-p)]`.
/// With every slot masked out the loss is defined as 0 (with a warning).
pub fn bce_loss(preds: &[f64], values: &[f64], mask: &[bool]) -> Result<f64> {
    if preds.len() != values.len() || preds.len() != mask.len() {
        return Err(Error::shape(
            "bce_loss",
            format!("{} preds, {} targets, {} mask", preds.len(), values.len(), mask.len()),
        ));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for ((&p, &y), &m) in preds.iter().zip(values).zip(mask) {
        if !m {
            continue;
        }
        let p = clamp_prob(p);
        total -= xlogy(y, p) + xlogy(1.0 - y, 1.0 - p);
        count += 1;
    }
    if count == 0 {
        log::warn!("bce_loss: every slot is masked out; loss defined as 0");
        return Ok(0.0);
    }
    Ok(total / count as f64)
}

/// Distribution loss for one sample: per-class Bernoulli KL of the soft label
/// row relative to the prediction row, summed over classes.
pub fn distribution_loss(soft_row: &[f64], pred_row: &[f64]) -> Result<f64> {
    if soft_row.len() != pred_row.len() {
        return Err(Error::contract(format!(
            "distribution_loss length mismatch: {} vs {}",
            soft_row.len(),
            pred_row.len()
        )));
    }
    Ok(soft_row
        .iter()
        .zip(pred_row)
        .map(|(&l, &p)| bernoulli_kl(l, p))
        .sum())
}

/// Normalize similarities to sum to one per anchor, so the smoothing term is
/// a convex combination over the K neighbors instead of a K-fold sum. Keeps
/// the smoothing pressure independent of K; an all-zero list stays zero.
pub fn normalize_sims(sims: &[f64]) -> Vec<f64> {
    let total: f64 = sims.iter().sum();
    if total <= 0.0 {
        return vec![0.0; sims.len()];
    }
    sims.iter().map(|&s| s / total).collect()
}

/// Neighbor smoothing loss for one anchor: `sum_k w_k * KL(q_k || p)` where
/// `q_k` is the k-th neighbor's prediction row, `p` the anchor's, and `w`
/// the normalized similarity weights (see [`normalize_sims`]).
pub fn neighbor_loss(anchor_pred: &[f64], neighbor_preds: &[f64], sims: &[f64]) -> Result<f64> {
    let classes = anchor_pred.len();
    if classes == 0 || neighbor_preds.len() != sims.len() * classes {
        return Err(Error::contract(format!(
            "neighbor_loss expects {} x {} neighbor predictions, got {}",
            sims.len(),
            classes,
            neighbor_preds.len()
        )));
    }
    let weights = normalize_sims(sims);
    let mut total = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let row = &neighbor_preds[k * classes..(k + 1) * classes];
        let kl: f64 = row
            .iter()
            .zip(anchor_pred)
            .map(|(&q, &p)| bernoulli_kl(clamp_prob(q), p))
            .sum();
        total += w * kl;
    }
    Ok(total)
}

/// [`neighbor_loss`] with raw (unnormalized) similarity weights: the literal
/// K-fold weighted sum. Kept for ablation via the config switch.
pub fn neighbor_loss_raw(anchor_pred: &[f64], neighbor_preds: &[f64], sims: &[f64]) -> Result<f64> {
    let classes = anchor_pred.len();
    if classes == 0 || neighbor_preds.len() != sims.len() * classes {
        return Err(Error::contract(format!(
            "neighbor_loss expects {} x {} neighbor predictions, got {}",
            sims.len(),
            classes,
            neighbor_preds.len()
        )));
    }
    let mut total = 0.0;
    for (k, &s) in sims.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let row = &neighbor_preds[k * classes..(k + 1) * classes];
        let kl: f64 = row
            .iter()
            .zip(anchor_pred)
            .map(|(&q, &p)| bernoulli_kl(clamp_prob(q), p))
            .sum();
        total += s * kl;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Graph builders
// ---------------------------------------------------------------------------

/// Masked BCE over a `batch x C` prediction node. Mask and targets are
/// constants; masked-out slots contribute nothing to value or gradient.
pub fn bce_loss_node(
    g: &mut Graph,
    preds: NodeId,
    values: &[f64],
    mask: &[bool],
) -> Result<NodeId> {
    let dims = g.output(preds).dims().to_vec();
    let n = g.output(preds).len();
    if values.len() != n || mask.len() != n {
        return Err(Error::shape(
            "bce_loss",
            format!("{} preds, {} targets, {} mask", n, values.len(), mask.len()),
        ));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        log::warn!("bce_loss: every slot is masked out; loss defined as 0");
        return Ok(g.value(Tensor::scalar(0.0)));
    }
    let y = g.value(Tensor::new(dims.clone(), values.to_vec())?);
    let m = g.value(Tensor::new(
        dims,
        mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
    )?);
    let p = g.clamp_prob(preds);
    let log_p = g.ln(p);
    let one_minus_p = g.one_minus(p);
    let log_q = g.ln(one_minus_p);
    let one_minus_y = g.one_minus(y);
    let pos = g.mul(y, log_p)?;
    let neg = g.mul(one_minus_y, log_q)?;
    let term = g.add(pos, neg)?;
    let masked = g.mul(m, term)?;
    let s = g.sum(masked);
    Ok(g.scale(s, -1.0 / count as f64))
}

/// Distribution loss over a batch: per-class Bernoulli KL against constant
/// soft label rows, summed over classes, averaged over the batch.
pub fn distribution_loss_node(g: &mut Graph, preds: NodeId, soft: &[f64]) -> Result<NodeId> {
    let out = g.output(preds);
    let dims = out.dims().to_vec();
    if soft.len() != out.len() {
        return Err(Error::contract(format!(
            "distribution_loss length mismatch: {} vs {}",
            soft.len(),
            out.len()
        )));
    }
    let batch = out.rows().max(1);
    // Constant entropy side of the KL, under the 0 log 0 convention.
    let entropy: f64 = soft.iter().map(|&l| xlogy(l, l) + xlogy(1.0 - l, 1.0 - l)).sum();

    let l = g.value(Tensor::new(dims.clone(), soft.to_vec())?);
    let one_minus_l = g.one_minus(l);
    let p = g.clamp_prob(preds);
    let log_p = g.ln(p);
    let one_minus_p = g.one_minus(p);
    let log_q = g.ln(one_minus_p);
    let pos = g.mul(l, log_p)?;
    let neg = g.mul(one_minus_l, log_q)?;
    let cross = g.add(pos, neg)?;
    let cross_sum = g.sum(cross);
    let neg_cross = g.scale(cross_sum, -1.0);
    let kl_sum = g.add_scalar(neg_cross, entropy);
    Ok(g.scale(kl_sum, 1.0 / batch as f64))
}

/// Neighbor smoothing loss over a batch. `anchor_preds` is `batch x C`,
/// `neighbor_preds` is `(batch*k) x C` grouped anchor-major, and `sims` holds
/// one similarity per neighbor row; each anchor's K weights are normalized to
/// sum to one (pass pre-scaled weights through [`neighbor_loss_node_raw`] for
/// the unnormalized variant). Gradients flow through both branches unless
/// `stop_neighbor_gradient` detaches the neighbor side.
pub fn neighbor_loss_node(
    g: &mut Graph,
    anchor_preds: NodeId,
    neighbor_preds: NodeId,
    sims: &[f64],
    k: usize,
    stop_neighbor_gradient: bool,
) -> Result<NodeId> {
    let batch = g.output(anchor_preds).rows();
    if sims.len() != batch * k {
        return Err(Error::contract(format!(
            "neighbor_loss got {} similarities for {} neighbor rows",
            sims.len(),
            batch * k
        )));
    }
    let mut weights = Vec::with_capacity(sims.len());
    for anchor_sims in sims.chunks_exact(k) {
        weights.extend(normalize_sims(anchor_sims));
    }
    neighbor_loss_node_raw(g, anchor_preds, neighbor_preds, &weights, k, stop_neighbor_gradient)
}

/// Graph form of the neighbor loss with caller-supplied weights (no
/// normalization applied).
pub fn neighbor_loss_node_raw(
    g: &mut Graph,
    anchor_preds: NodeId,
    neighbor_preds: NodeId,
    sims: &[f64],
    k: usize,
    stop_neighbor_gradient: bool,
) -> Result<NodeId> {
    let (batch, classes) = {
        let a = g.output(anchor_preds);
        (a.rows(), a.cols())
    };
    {
        let q = g.output(neighbor_preds);
        if q.dims() != [batch * k, classes] {
            return Err(Error::shape(
                "neighbor_loss",
                format!(
                    "neighbor predictions {:?}, expected {:?}",
                    q.dims(),
                    [batch * k, classes]
                ),
            ));
        }
    }
    if sims.len() != batch * k {
        return Err(Error::contract(format!(
            "neighbor_loss got {} similarities for {} neighbor rows",
            sims.len(),
            batch * k
        )));
    }

    let neighbor_preds = if stop_neighbor_gradient {
        g.detach(neighbor_preds)
    } else {
        neighbor_preds
    };

    // KL(q || p) per slot with both sides on the graph:
    //   q ln q - q ln p + (1-q) ln(1-q) - (1-q) ln(1-p)
    let p_rep = g.repeat_rows(anchor_preds, k)?;
    let p = g.clamp_prob(p_rep);
    let q = g.clamp_prob(neighbor_preds);
    let log_p = g.ln(p);
    let log_q = g.ln(q);
    let one_minus_p = g.one_minus(p);
    let one_minus_q = g.one_minus(q);
    let log_1p = g.ln(one_minus_p);
    let log_1q = g.ln(one_minus_q);

    let t1 = g.mul(q, log_q)?;
    let t2 = g.mul(q, log_p)?;
    let t3 = g.mul(one_minus_q, log_1q)?;
    let t4 = g.mul(one_minus_q, log_1p)?;
    let a = g.sub(t1, t2)?;
    let b = g.sub(t3, t4)?;
    let kl = g.add(a, b)?;

    // Per-row similarity weights, broadcast across classes.
    let mut weights = Vec::with_capacity(batch * k * classes);
    for &s in sims {
        weights.extend(std::iter::repeat_n(s, classes));
    }
    let w = g.value(Tensor::new(vec![batch * k, classes], weights)?);
    let weighted = g.mul(w, kl)?;
    let s = g.sum(weighted);
    Ok(g.scale(s, 1.0 / batch as f64))
}

/// Combine per-term scalar nodes into the total objective node. Absent terms
/// (weight zero) contribute nothing.
pub fn combine_loss_nodes(
    g: &mut Graph,
    cls: NodeId,
    distri: Option<NodeId>,
    neigh: Option<NodeId>,
    w: &LossWeights,
) -> Result<NodeId> {
    w.validate()?;
    let mut total = cls;
    if let Some(d) = distri {
        let scaled = g.scale(d, w.lambda);
        total = g.add(total, scaled)?;
    }
    if let Some(nb) = neigh {
        let scaled = g.scale(nb, w.gamma);
        total = g.add(total, scaled)?;
    }
    Ok(total)
}

/// Assemble the per-anchor neighbor feature block and similarity list for a
/// batch. Returns `(features, sims)` where features are `(batch*k) x D`
/// row-major, anchor-major ordered.
pub fn gather_neighbor_batch(
    batch_ids: &[u64],
    pool: &NeighborPool,
    pool_index: &std::collections::HashMap<u64, usize>,
    features_by_id: &std::collections::HashMap<u64, Vec<f64>>,
    feature_dim: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = pool.k;
    let mut feats = Vec::with_capacity(batch_ids.len() * k * feature_dim);
    let mut sims = Vec::with_capacity(batch_ids.len() * k);
    for &id in batch_ids {
        let idx = pool_index
            .get(&id)
            .ok_or_else(|| Error::config("pool", format!("no pool entry for sample {id}")))?;
        let anchor = &pool.anchors[*idx];
        if anchor.neighbors.len() != k {
            return Err(Error::config(
                "pool",
                format!("sample {id} has {} neighbors, pool K is {k}", anchor.neighbors.len()),
            ));
        }
        for n in &anchor.neighbors {
            let f = features_by_id.get(&n.id).ok_or_else(|| {
                Error::config("pool", format!("neighbor {} is not in the training split", n.id))
            })?;
            feats.extend_from_slice(f);
            sims.push(n.similarity);
        }
    }
    debug_assert_eq!(feats.len(), batch_ids.len() * k * feature_dim);
    Ok((feats, sims))
}

/// Check that soft labels and the pool cover every training sample.
pub fn check_coverage(
    train_ids: &[u64],
    soft: &SoftLabelDistribution,
    pool: &NeighborPool,
) -> Result<()> {
    let soft_ids: std::collections::HashSet<u64> = soft.sample_ids.iter().copied().collect();
    let pool_ids: std::collections::HashSet<u64> =
        pool.anchors.iter().map(|a| a.anchor_id).collect();
    for &id in train_ids {
        if !soft_ids.contains(&id) {
            return Err(Error::config("soft-labels", format!("no soft label row for sample {id}")));
        }
        if !pool_ids.contains(&id) {
            return Err(Error::config("pool", format!("missing pool entry for sample {id}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::grad_check;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn bce_perfect_predictions_are_almost_zero() {
        let loss = bce_loss(
            &[1.0, 0.0, 1.0, 0.0],
            &[1.0, 0.0, 1.0, 0.0],
            &[true, true, true, true],
        )
        .unwrap();
        assert!(loss <= 1e-6, "loss {loss}");
        assert!(loss >= 0.0);
    }

    #[test]
    fn bce_half_on_positive_is_ln_two() {
        let loss = bce_loss(&[0.5], &[1.0], &[true]).unwrap();
        assert!((loss - LN2).abs() < 1e-12);
    }

    #[test]
    fn bce_mask_excludes_slots_from_the_mean() {
        // One masked-out slot plus one y=1, p=0.5 slot: mean over 1 slot.
        let loss = bce_loss(&[0.9, 0.5], &[0.0, 1.0], &[false, true]).unwrap();
        assert!((loss - LN2).abs() < 1e-12);
    }

    #[test]
    fn bce_all_masked_is_zero() {
        let loss = bce_loss(&[0.9, 0.5], &[0.0, 1.0], &[false, false]).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn distribution_loss_identity_is_zero() {
        let row = [0.3, 0.8, 0.512];
        assert_eq!(distribution_loss(&row, &row).unwrap(), 0.0);
    }

    #[test]
    fn distribution_loss_hard_one_against_half_is_ln_two() {
        let loss = distribution_loss(&[1.0], &[0.5]).unwrap();
        assert!((loss - LN2).abs() < 1e-12);
    }

    #[test]
    fn distribution_loss_worked_value() {
        // Both classes contribute 0.8 ln(0.8/0.6) + 0.2 ln(0.2/0.4);
        // 0.18303244369887136 frozen from a 40-digit oracle.
        let loss = distribution_loss(&[0.8, 0.2], &[0.6, 0.4]).unwrap();
        assert!((loss - 0.18303244369887136).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn neighbor_loss_agreement_is_zero() {
        let anchor = [0.4, 0.7];
        let neighbors = [0.4, 0.7, 0.4, 0.7];
        let loss = neighbor_loss(&anchor, &neighbors, &[0.9, 0.4]).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn neighbor_loss_worked_value() {
        // One neighbor, s=1, neighbor 0.5 vs anchor 0.25:
        // 0.5 ln(0.5/0.25) + 0.5 ln(0.5/0.75)
        let loss = neighbor_loss(&[0.25], &[0.5], &[1.0]).unwrap();
        assert!((loss - 0.14384103622589045).abs() < 1e-12, "loss {loss}");
    }

    #[test]
    fn zero_similarity_contributes_nothing() {
        let with = neighbor_loss(&[0.3], &[0.9, 0.8], &[0.5, 0.0]).unwrap();
        let without = neighbor_loss(&[0.3], &[0.9], &[0.5]).unwrap();
        assert_eq!(with, without);
    }

    #[test]
    fn total_loss_is_the_weighted_sum() {
        let w = LossWeights { lambda: 0.1, gamma: 0.1 };
        let b = total_loss(1.0, 0.5, 0.2, &w).unwrap();
        assert!((b.total - 1.07).abs() < 1e-12);
        assert!((b.total - (b.cls + w.lambda * b.distri + w.gamma * b.neigh)).abs() < 1e-12);

        let zero = total_loss(0.7, 0.5, 0.2, &LossWeights { lambda: 0.0, gamma: 0.0 }).unwrap();
        assert_eq!(zero.total, zero.cls);

        let all_zero = total_loss(0.0, 0.0, 0.0, &w).unwrap();
        assert_eq!(all_zero.total, 0.0);
    }

    #[test]
    fn total_loss_rejects_bad_inputs() {
        assert!(total_loss(f64::NAN, 0.0, 0.0, &LossWeights::default()).is_err());
        assert!(total_loss(0.0, 0.0, 0.0, &LossWeights { lambda: -0.1, gamma: 0.0 }).is_err());
    }

    // Graph forms agree with the scalar forms.

    #[test]
    fn bce_node_matches_scalar() {
        let preds = [0.82, 0.11, 0.47, 0.93, 0.28, 0.66];
        let values = [1.0, 0.0, 0.7, 1.0, 0.0, 0.0];
        let mask = [true, true, false, true, true, true];
        let scalar = bce_loss(&preds, &values, &mask).unwrap();

        let mut g = Graph::new();
        let p = g.value(Tensor::matrix(2, 3, preds.to_vec()).unwrap());
        let node = bce_loss_node(&mut g, p, &values, &mask).unwrap();
        assert!((g.output(node).item() - scalar).abs() < 1e-12);
    }

    #[test]
    fn distribution_node_matches_scalar_rows() {
        let preds = [0.82, 0.11, 0.47, 0.93];
        let soft = [0.9, 0.2, 0.5, 1.0];
        let mut expect = 0.0;
        for r in 0..2 {
            expect += distribution_loss(&soft[r * 2..r * 2 + 2], &preds[r * 2..r * 2 + 2]).unwrap();
        }
        expect /= 2.0;

        let mut g = Graph::new();
        let p = g.value(Tensor::matrix(2, 2, preds.to_vec()).unwrap());
        let node = distribution_loss_node(&mut g, p, &soft).unwrap();
        assert!((g.output(node).item() - expect).abs() < 1e-12);
    }

    #[test]
    fn neighbor_node_matches_scalar_rows() {
        // batch of 2 anchors, k = 2, 1 class
        let anchors = [0.25, 0.7];
        let neighbors = [0.5, 0.3, 0.6, 0.8];
        let sims = [1.0, 0.5, 0.25, 0.0];
        let expect = (neighbor_loss(&anchors[0..1], &neighbors[0..2], &sims[0..2]).unwrap()
            + neighbor_loss(&anchors[1..2], &neighbors[2..4], &sims[2..4]).unwrap())
            / 2.0;

        let mut g = Graph::new();
        let a = g.value(Tensor::matrix(2, 1, anchors.to_vec()).unwrap());
        let q = g.value(Tensor::matrix(4, 1, neighbors.to_vec()).unwrap());
        let node = neighbor_loss_node(&mut g, a, q, &sims, 2, false).unwrap();
        assert!((g.output(node).item() - expect).abs() < 1e-12);
    }

    // Gradient correctness of the graph forms, driven through sigmoid so the
    // leaf lives in logit space.

    #[test]
    fn bce_node_gradient_checks_out() {
        let values = [1.0, 0.0, 0.55, 1.0];
        let mask = [true, true, true, false];
        let err = grad_check(
            |g, x| {
                let m = g.reshape(x, vec![2, 2])?;
                let s = g.sigmoid(m);
                bce_loss_node(g, s, &values, &mask)
            },
            &[0.3, -0.8, 1.2, 0.05],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-7, "relative error {err}");
    }

    #[test]
    fn distribution_node_gradient_checks_out() {
        let soft = [0.9, 0.2, 0.5, 1.0];
        let err = grad_check(
            |g, x| {
                let m = g.reshape(x, vec![2, 2])?;
                let s = g.sigmoid(m);
                distribution_loss_node(g, s, &soft)
            },
            &[0.3, -0.8, 1.2, 0.05],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-7, "relative error {err}");
    }

    #[test]
    fn neighbor_node_gradient_flows_through_both_branches() {
        // Anchor and neighbor predictions come from the same model, which is
        // exactly how training uses the loss; the check covers gradient flow
        // through both sides of the KL and the shared parameters.
        use crate::gradcheck::grad_check_params;
        use crate::net::{forward_on_graph, Activation, ModelSpec, Parameters};

        let spec = ModelSpec::new("t", 2, vec![3], 2, Activation::Tanh, 5).unwrap();
        let params = Parameters::init(&spec).unwrap();
        let anchors_x = Tensor::matrix(2, 2, vec![0.4, -1.1, 0.9, 0.3]).unwrap();
        let neighbors_x =
            Tensor::matrix(4, 2, vec![0.5, -0.9, 1.0, 0.2, -0.3, 0.7, 0.1, 0.1]).unwrap();
        let sims = [1.0, 0.5, 0.8, 0.2];

        let err = grad_check_params(
            |g, nodes| {
                let af = g.value(anchors_x.clone());
                let nf = g.value(neighbors_x.clone());
                let ap = forward_on_graph(g, &spec, nodes, af)?;
                let np = forward_on_graph(g, &spec, nodes, nf)?;
                neighbor_loss_node(g, ap, np, &sims, 2, false)
            },
            &params,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "relative error {err}");
    }

    #[test]
    fn stop_gradient_detaches_the_neighbor_branch() {
        let anchors = vec![0.4];
        let mut g = Graph::new();
        let logits = g.param(Tensor::matrix(1, 1, vec![0.2]).unwrap());
        let q_raw = g.sigmoid(logits);
        let a = g.value(Tensor::matrix(1, 1, anchors).unwrap());
        let node = neighbor_loss_node(&mut g, a, q_raw, &[1.0], 1, true).unwrap();
        let grads = g.backward(node).unwrap();
        assert_eq!(grads.wrt(&g, logits).data(), &[0.0]);

        // Without the stop, the same setup produces gradient.
        let mut g = Graph::new();
        let logits = g.param(Tensor::matrix(1, 1, vec![0.2]).unwrap());
        let q_raw = g.sigmoid(logits);
        let a = g.value(Tensor::matrix(1, 1, vec![0.4]).unwrap());
        let node = neighbor_loss_node(&mut g, a, q_raw, &[1.0], 1, false).unwrap();
        let grads = g.backward(node).unwrap();
        assert!(grads.wrt(&g, logits).data()[0].abs() > 1e-6);
    }
}
