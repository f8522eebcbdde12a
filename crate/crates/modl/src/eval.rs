//! ROC/AUC evaluation: per-class AUC via the rank form of the Mann-Whitney
//! statistic (ties get average ranks), ROC curve export, single-model and
//! ensemble evaluation, and the ablation table.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, RawLabel};
use crate::error::{Error, Result};
use crate::net::{forward, ModelSpec, Parameters};
use crate::tensor::Tensor;

/// Binary evaluation ground truth with an exclusion mask (e.g. uncertain
/// slots stay out of the AUC).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTargets {
    pub classes: usize,
    /// `n x C` row-major binary labels.
    pub labels: Vec<bool>,
    /// `n x C` row-major inclusion mask.
    pub mask: Vec<bool>,
}

impl EvalTargets {
    /// Ground truth from raw labels: positive -> 1, negative and unmentioned
    /// -> 0, uncertain excluded.
    pub fn from_raw_labels(dataset: &Dataset) -> Self {
        let classes = dataset.classes();
        let mut labels = Vec::with_capacity(dataset.len() * classes);
        let mut mask = Vec::with_capacity(dataset.len() * classes);
        for s in &dataset.samples {
            for &l in &s.raw_labels {
                match l {
                    RawLabel::Positive => {
                        labels.push(true);
                        mask.push(true);
                    }
                    RawLabel::Negative | RawLabel::Unmentioned => {
                        labels.push(false);
                        mask.push(true);
                    }
                    RawLabel::Uncertain => {
                        labels.push(false);
                        mask.push(false);
                    }
                }
            }
        }
        EvalTargets { classes, labels, mask }
    }

    /// Clean ground truth from the synthetic generator's probabilities,
    /// thresholded at 0.5. Errors when the dataset carries none.
    pub fn from_true_probs(dataset: &Dataset) -> Result<Self> {
        let classes = dataset.classes();
        let mut labels = Vec::with_capacity(dataset.len() * classes);
        for s in &dataset.samples {
            let probs = s
                .true_probs
                .as_ref()
                .ok_or_else(|| Error::contract("dataset has no true_probs ground truth"))?;
            labels.extend(probs.iter().map(|&p| p >= 0.5));
        }
        let mask = vec![true; labels.len()];
        Ok(EvalTargets { classes, labels, mask })
    }
}

/// AUC by the Mann-Whitney rank statistic: the fraction of
/// (positive, negative) pairs where the positive scores higher, ties
/// counting one half. `None` when a class lacks positives or negatives.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    if scores.len() != labels.len() {
        return Err(Error::contract(format!(
            "roc_auc got {} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::contract("roc_auc needs at least one sample"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::contract("roc_auc scores must be finite"));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Ok(None);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // Average ranks over tie groups, then sum positive ranks.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share the average.
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let p = positives as f64;
    let n = negatives as f64;
    let u = rank_sum_pos - p * (p + 1.0) / 2.0;
    Ok(Some(u / (p * n)))
}

/// ROC curve as (FPR, TPR) points from (0,0) to (1,1), one point per
/// distinct score threshold (descending).
pub fn roc_points(scores: &[f64], labels: &[bool]) -> Vec<(f64, f64)> {
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return vec![(0.0, 0.0), (1.0, 1.0)];
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut points = Vec::with_capacity(scores.len() + 2);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        for &idx in &order[i..=j] {
            if labels[idx] {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
        i = j + 1;
    }
    if *points.last().unwrap() != (1.0, 1.0) {
        points.push((1.0, 1.0));
    }
    points
}

/// Evaluation result of one model (or ensemble) over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    /// Per-class AUC; `None` when the class lacks positives or negatives.
    pub class_auc: Vec<Option<f64>>,
    /// Mean over defined classes.
    pub mean_auc: Option<f64>,
    /// How many classes were excluded from the mean.
    pub undefined_classes: usize,
    /// Per-class ROC points (FPR, TPR).
    pub roc: Vec<Vec<(f64, f64)>>,
    pub param_count: usize,
}

/// Score a prediction grid (`n x C`) against targets.
pub fn evaluate_scores(
    scores: &Tensor,
    targets: &EvalTargets,
    class_names: &[String],
    param_count: usize,
) -> Result<EvalReport> {
    if scores.is_empty() {
        return Err(Error::contract("evaluate on an empty dataset"));
    }
    let c = targets.classes;
    if scores.cols() != c || scores.len() != targets.labels.len() {
        return Err(Error::shape(
            "evaluate",
            format!("scores {:?} vs {} target slots", scores.dims(), targets.labels.len()),
        ));
    }
    let n = scores.rows();
    let mut class_auc = Vec::with_capacity(c);
    let mut roc = Vec::with_capacity(c);
    for class in 0..c {
        let mut s = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n);
        for row in 0..n {
            let slot = row * c + class;
            if targets.mask[slot] {
                s.push(scores.data()[slot]);
                l.push(targets.labels[slot]);
            }
        }
        if s.is_empty() {
            class_auc.push(None);
            roc.push(vec![(0.0, 0.0), (1.0, 1.0)]);
            continue;
        }
        class_auc.push(roc_auc(&s, &l)?);
        roc.push(roc_points(&s, &l));
    }
    let defined: Vec<f64> = class_auc.iter().filter_map(|a| *a).collect();
    let mean_auc = if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    };
    Ok(EvalReport {
        class_names: class_names.to_vec(),
        class_auc,
        mean_auc,
        undefined_classes: c - defined.len(),
        roc,
        param_count,
    })
}

/// Evaluate one model over a dataset.
pub fn evaluate(
    spec: &ModelSpec,
    params: &Parameters,
    dataset: &Dataset,
    targets: &EvalTargets,
) -> Result<EvalReport> {
    if dataset.is_empty() {
        return Err(Error::contract("evaluate on an empty dataset"));
    }
    let features = Tensor::matrix(dataset.len(), dataset.feature_dim(), dataset.feature_matrix())?;
    let scores = forward(spec, params, &features)?;
    evaluate_scores(&scores, targets, &dataset.class_names, spec.param_count())
}

/// Evaluate an ensemble: scores are the arithmetic mean of member
/// predictions and the parameter count is the sum of members.
pub fn ensemble_evaluate(
    members: &[(ModelSpec, Parameters)],
    dataset: &Dataset,
    targets: &EvalTargets,
) -> Result<EvalReport> {
    if members.is_empty() {
        return Err(Error::contract("ensemble_evaluate needs at least one member"));
    }
    if dataset.is_empty() {
        return Err(Error::contract("evaluate on an empty dataset"));
    }
    let features = Tensor::matrix(dataset.len(), dataset.feature_dim(), dataset.feature_matrix())?;
    let mut acc = vec![0.0; dataset.len() * dataset.classes()];
    for (spec, params) in members {
        if spec.output_dim != dataset.classes() {
            return Err(Error::shape(
                "ensemble_evaluate",
                format!("model `{}` has {} outputs for {} classes", spec.name, spec.output_dim, dataset.classes()),
            ));
        }
        let scores = forward(spec, params, &features)?;
        for (a, &s) in acc.iter_mut().zip(scores.data()) {
            *a += s;
        }
    }
    let inv = 1.0 / members.len() as f64;
    for a in acc.iter_mut() {
        *a *= inv;
    }
    let scores = Tensor::matrix(dataset.len(), dataset.classes(), acc)?;
    let param_count = members.iter().map(|(s, _)| s.param_count()).sum();
    evaluate_scores(&scores, targets, &dataset.class_names, param_count)
}

/// The four training arms compared in the ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arm {
    Baseline,
    Modl,
    Knns,
    ModlKnns,
}

impl Arm {
    pub const ALL: [Arm; 4] = [Arm::Baseline, Arm::Modl, Arm::Knns, Arm::ModlKnns];

    pub fn label(&self) -> &'static str {
        match self {
            Arm::Baseline => "B",
            Arm::Modl => "B+MODL",
            Arm::Knns => "B+KNNS",
            Arm::ModlKnns => "B+MODL+KNNS",
        }
    }

    pub fn slug(&self) -> &'static str {
        match self {
            Arm::Baseline => "b",
            Arm::Modl => "b-modl",
            Arm::Knns => "b-knns",
            Arm::ModlKnns => "b-modl-knns",
        }
    }

    pub fn from_slug(s: &str) -> Option<Arm> {
        match s {
            "b" => Some(Arm::Baseline),
            "b-modl" => Some(Arm::Modl),
            "b-knns" => Some(Arm::Knns),
            "b-modl-knns" => Some(Arm::ModlKnns),
            _ => None,
        }
    }

    /// Which auxiliary losses the arm enables, given base weights.
    pub fn weights(&self, lambda: f64, gamma: f64) -> (f64, f64) {
        match self {
            Arm::Baseline => (0.0, 0.0),
            Arm::Modl => (lambda, 0.0),
            Arm::Knns => (0.0, gamma),
            Arm::ModlKnns => (lambda, gamma),
        }
    }
}

/// Summary row of one arm in the ablation table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: Arm,
    /// Per-class AUC averaged over seeds (`None` if undefined in any seed).
    pub class_mean: Vec<Option<f64>>,
    /// Mean over seeds of the per-seed mean AUC.
    pub mean_auc: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub spread: f64,
    /// Per-class delta vs the baseline arm.
    pub class_delta_vs_baseline: Vec<Option<f64>>,
    /// Per-seed mean AUCs, in seed order.
    pub per_seed_mean: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationTable {
    pub class_names: Vec<String>,
    pub arms: Vec<ArmSummary>,
}

/// Build the ablation table from per-arm per-seed reports. Every arm must be
/// present for every seed; missing arms are listed in the error.
pub fn ablation_report(
    runs: &HashMap<Arm, Vec<EvalReport>>,
    class_names: &[String],
) -> Result<AblationTable> {
    let missing: Vec<&str> = Arm::ALL
        .iter()
        .filter(|a| runs.get(a).is_none_or(|r| r.is_empty()))
        .map(|a| a.label())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Missing(format!("ablation arms absent: {}", missing.join(", "))));
    }
    let seeds = runs[&Arm::Baseline].len();
    for arm in Arm::ALL {
        if runs[&arm].len() != seeds {
            return Err(Error::contract(format!(
                "arm {} has {} runs, baseline has {seeds}",
                arm.label(),
                runs[&arm].len()
            )));
        }
    }
    let c = class_names.len();

    let class_mean_of = |arm: Arm| -> Vec<Option<f64>> {
        (0..c)
            .map(|class| {
                let vals: Vec<f64> = runs[&arm]
                    .iter()
                    .filter_map(|r| r.class_auc[class])
                    .collect();
                if vals.len() == seeds {
                    Some(vals.iter().sum::<f64>() / seeds as f64)
                } else {
                    None
                }
            })
            .collect()
    };
    let baseline_class = class_mean_of(Arm::Baseline);

    let mut arms = Vec::with_capacity(4);
    for arm in Arm::ALL {
        let per_seed_mean: Vec<f64> = runs[&arm]
            .iter()
            .map(|r| r.mean_auc.unwrap_or(f64::NAN))
            .collect();
        let mean_auc = per_seed_mean.iter().sum::<f64>() / seeds as f64;
        let spread = if seeds > 1 {
            let var = per_seed_mean
                .iter()
                .map(|m| (m - mean_auc) * (m - mean_auc))
                .sum::<f64>()
                / (seeds - 1) as f64;
            var.sqrt()
        } else {
            0.0
        };
        let class_mean = class_mean_of(arm);
        let class_delta_vs_baseline = class_mean
            .iter()
            .zip(&baseline_class)
            .map(|(a, b)| match (a, b) {
                (Some(x), Some(y)) => Some(x - y),
                _ => None,
            })
            .collect();
        arms.push(ArmSummary {
            arm,
            class_mean,
            mean_auc,
            spread,
            class_delta_vs_baseline,
            per_seed_mean,
        });
    }
    Ok(AblationTable {
        class_names: class_names.to_vec(),
        arms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_auc_example() {
        let auc = roc_auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true])
            .unwrap()
            .unwrap();
        assert!((auc - 0.75).abs() < 1e-15);
    }

    #[test]
    fn perfect_separation_is_one() {
        let auc = roc_auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false])
            .unwrap()
            .unwrap();
        assert_eq!(auc, 1.0);
    }

    #[test]
    fn all_ties_give_half() {
        let auc = roc_auc(&[0.5; 6], &[true, false, true, false, true, false])
            .unwrap()
            .unwrap();
        assert!((auc - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_classes_are_undefined() {
        assert_eq!(roc_auc(&[0.1, 0.2], &[true, true]).unwrap(), None);
        assert_eq!(roc_auc(&[0.1, 0.2], &[false, false]).unwrap(), None);
    }

    #[test]
    fn non_finite_scores_are_rejected() {
        assert!(roc_auc(&[0.1, f64::NAN], &[true, false]).is_err());
        assert!(roc_auc(&[], &[]).is_err());
    }

    #[test]
    fn auc_matches_pairwise_oracle_with_ties() {
        // Brute force over all (positive, negative) pairs.
        let scores = [0.3, 0.3, 0.7, 0.1, 0.7, 0.5, 0.3];
        let labels = [true, false, true, false, false, true, true];
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        let oracle = wins / pairs;
        let auc = roc_auc(&scores, &labels).unwrap().unwrap();
        assert!((auc - oracle).abs() < 1e-15);
    }

    #[test]
    fn roc_curve_is_monotone_and_anchored() {
        let scores = [0.9, 0.1, 0.5, 0.5, 0.3, 0.8];
        let labels = [true, false, true, false, false, true];
        let pts = roc_points(&scores, &labels);
        assert_eq!(*pts.first().unwrap(), (0.0, 0.0));
        assert_eq!(*pts.last().unwrap(), (1.0, 1.0));
        for w in pts.windows(2) {
            assert!(w[1].0 >= w[0].0);
            assert!(w[1].1 >= w[0].1);
        }
    }

    fn targets(labels: Vec<bool>, classes: usize) -> EvalTargets {
        let mask = vec![true; labels.len()];
        EvalTargets { classes, labels, mask }
    }

    #[test]
    fn evaluate_scores_excludes_undefined_classes_from_mean() {
        // Class 0 separable, class 1 all-positive (undefined).
        let scores = Tensor::matrix(4, 2, vec![0.9, 0.5, 0.8, 0.5, 0.1, 0.5, 0.2, 0.5]).unwrap();
        let t = targets(
            vec![true, true, true, true, false, true, false, true],
            2,
        );
        let names = vec!["a".to_string(), "b".to_string()];
        let report = evaluate_scores(&scores, &t, &names, 123).unwrap();
        assert_eq!(report.class_auc[0], Some(1.0));
        assert_eq!(report.class_auc[1], None);
        assert_eq!(report.undefined_classes, 1);
        assert_eq!(report.mean_auc, Some(1.0));
        assert_eq!(report.param_count, 123);
    }

    #[test]
    fn evaluate_is_deterministic() {
        use crate::data::{generate_synthetic, SynthConfig};
        use crate::net::Activation;
        let d = generate_synthetic(&SynthConfig {
            n_samples: 40,
            feature_dim: 6,
            classes: 3,
            flip_rate: 0.1,
            uncertain_fraction: 0.1,
            separation: 2.0,
            seed: 8,
        })
        .unwrap();
        let spec = ModelSpec::new("m", 6, vec![8], 3, Activation::Relu, 4).unwrap();
        let params = Parameters::init(&spec).unwrap();
        let t = EvalTargets::from_true_probs(&d).unwrap();
        let a = evaluate(&spec, &params, &d, &t).unwrap();
        let b = evaluate(&spec, &params, &d, &t).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_member_ensemble_equals_evaluate() {
        use crate::data::{generate_synthetic, SynthConfig};
        use crate::net::Activation;
        let d = generate_synthetic(&SynthConfig {
            n_samples: 30,
            feature_dim: 5,
            classes: 2,
            flip_rate: 0.0,
            uncertain_fraction: 0.0,
            separation: 2.0,
            seed: 9,
        })
        .unwrap();
        let spec = ModelSpec::new("m", 5, vec![6], 2, Activation::Tanh, 3).unwrap();
        let params = Parameters::init(&spec).unwrap();
        let t = EvalTargets::from_true_probs(&d).unwrap();
        let single = evaluate(&spec, &params, &d, &t).unwrap();
        let ens = ensemble_evaluate(&[(spec.clone(), params.clone())], &d, &t).unwrap();
        assert_eq!(single.class_auc, ens.class_auc);
        assert_eq!(single.mean_auc, ens.mean_auc);

        // N identical copies keep member-identical AUC; params sum.
        let members = vec![(spec.clone(), params.clone()); 3];
        let ens3 = ensemble_evaluate(&members, &d, &t).unwrap();
        assert_eq!(ens3.class_auc, single.class_auc);
        assert_eq!(ens3.param_count, 3 * spec.param_count());
    }

    #[test]
    fn oracle_scores_dominate_any_model() {
        use crate::data::{generate_synthetic, SynthConfig};
        use crate::net::Activation;
        let d = generate_synthetic(&SynthConfig {
            n_samples: 60,
            feature_dim: 6,
            classes: 3,
            flip_rate: 0.0,
            uncertain_fraction: 0.0,
            separation: 2.0,
            seed: 12,
        })
        .unwrap();
        let t = EvalTargets::from_true_probs(&d).unwrap();

        // Oracle: score with the generator's own probabilities.
        let mut probs = Vec::new();
        for s in &d.samples {
            probs.extend_from_slice(s.true_probs.as_ref().unwrap());
        }
        let oracle = evaluate_scores(
            &Tensor::matrix(d.len(), 3, probs).unwrap(),
            &t,
            &d.class_names,
            0,
        )
        .unwrap();

        let spec = ModelSpec::new("m", 6, vec![8], 3, Activation::Relu, 77).unwrap();
        let params = Parameters::init(&spec).unwrap();
        let model = evaluate(&spec, &params, &d, &t).unwrap();
        assert!(oracle.mean_auc.unwrap() >= model.mean_auc.unwrap());
        assert_eq!(oracle.mean_auc, Some(1.0));
    }

    #[test]
    fn ablation_table_shape_and_missing_arm() {
        let names = vec!["x".to_string(), "y".to_string()];
        let report = EvalReport {
            class_names: names.clone(),
            class_auc: vec![Some(0.8), Some(0.9)],
            mean_auc: Some(0.85),
            undefined_classes: 0,
            roc: vec![vec![(0.0, 0.0), (1.0, 1.0)]; 2],
            param_count: 10,
        };
        let mut runs = HashMap::new();
        for arm in [Arm::Baseline, Arm::Modl, Arm::Knns] {
            runs.insert(arm, vec![report.clone(), report.clone()]);
        }
        let err = ablation_report(&runs, &names).unwrap_err();
        assert!(err.to_string().contains("B+MODL+KNNS"), "{err}");

        runs.insert(Arm::ModlKnns, vec![report.clone(), report.clone()]);
        let table = ablation_report(&runs, &names).unwrap();
        assert_eq!(table.arms.len(), 4);
        for arm in &table.arms {
            assert_eq!(arm.class_mean.len(), 2);
            // Identical reports in every arm: all deltas zero.
            for d in arm.class_delta_vs_baseline.iter().flatten() {
                assert_eq!(*d, 0.0);
            }
            assert!((arm.mean_auc - 0.85).abs() < 1e-15);
            assert_eq!(arm.spread, 0.0);
        }
    }
}
