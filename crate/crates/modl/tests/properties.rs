//! Property tests for the invariants that hold over whole input
//! families rather than single examples.

use proptest::prelude::*;

use modl::data::{generate_synthetic, load_csv, split, write_csv, SynthConfig};
use modl::eval::roc_auc;
use modl::labels::{aggregate_soft_labels, ReferencePredictions, SoftLabelDistribution};
use modl::losses::{bernoulli_kl, distribution_loss, neighbor_loss, total_loss, LossWeights};
use modl::neighbors::build_neighbor_pool;
use modl::train::lr_schedule;

fn synth_strategy() -> impl Strategy<Value = SynthConfig> {
    (
        5usize..60,
        1usize..6,
        1usize..4,
        0.0f64..0.4,
        0.0f64..0.4,
        any::<u64>(),
    )
        .prop_map(|(n, d, c, flip, unc, seed)| SynthConfig {
            n_samples: n,
            feature_dim: d,
            classes: c,
            flip_rate: flip,
            uncertain_fraction: unc,
            separation: 2.5,
            seed,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_preserves_everything_but_true_probs(config in synth_strategy()) {
        let dataset = generate_synthetic(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_csv(&dataset, &path).unwrap();
        let loaded = load_csv(&path).unwrap();
        prop_assert_eq!(&loaded.class_names, &dataset.class_names);
        prop_assert_eq!(loaded.len(), dataset.len());
        for (a, b) in loaded.samples.iter().zip(&dataset.samples) {
            prop_assert_eq!(a.id, b.id);
            prop_assert_eq!(&a.features, &b.features);
            prop_assert_eq!(&a.raw_labels, &b.raw_labels);
            prop_assert!(a.true_probs.is_none());
        }
    }

    #[test]
    fn splits_partition_the_id_multiset(config in synth_strategy(), seed in any::<u64>()) {
        prop_assume!(config.n_samples >= 10);
        let dataset = generate_synthetic(&config).unwrap();
        let (a, b, c) = split(&dataset, (0.6, 0.2, 0.2), seed).unwrap();
        prop_assert!((a.len() as i64 - (0.6 * dataset.len() as f64) as i64).abs() <= 1);

        let mut ids: Vec<u64> = a.samples.iter().chain(&b.samples).chain(&c.samples).map(|s| s.id).collect();
        let before = ids.len();
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), before, "an id appears in two splits");
        prop_assert_eq!(ids.len(), dataset.len());
    }

    #[test]
    fn bernoulli_kl_is_nonnegative_and_zero_iff_equal(
        l in 0.0f64..=1.0,
        p in 0.001f64..0.999,
    ) {
        let kl = bernoulli_kl(l, p);
        prop_assert!(kl >= 0.0);
        let self_kl = bernoulli_kl(p, p);
        prop_assert!(self_kl.abs() < 1e-12);
        if (l - p).abs() > 1e-3 {
            prop_assert!(kl > 0.0);
        }
    }

    #[test]
    fn distribution_loss_is_nonnegative(
        l in proptest::collection::vec(0.0f64..=1.0, 1..8),
        p in proptest::collection::vec(0.001f64..0.999, 1..8),
    ) {
        prop_assume!(l.len() == p.len());
        prop_assert!(distribution_loss(&l, &p).unwrap() >= 0.0);
    }

    #[test]
    fn neighbor_loss_is_nonnegative(
        anchor in proptest::collection::vec(0.01f64..0.99, 3),
        neighbors in proptest::collection::vec(0.01f64..0.99, 6),
        sims in proptest::collection::vec(0.0f64..=1.0, 2),
    ) {
        prop_assert!(neighbor_loss(&anchor, &neighbors, &sims).unwrap() >= 0.0);
    }

    #[test]
    fn total_loss_identity_holds(
        cls in 0.0f64..10.0,
        distri in 0.0f64..10.0,
        neigh in 0.0f64..10.0,
        lambda in 0.0f64..2.0,
        gamma in 0.0f64..2.0,
    ) {
        let w = LossWeights { lambda, gamma };
        let b = total_loss(cls, distri, neigh, &w).unwrap();
        prop_assert!((b.total - (b.cls + lambda * b.distri + gamma * b.neigh)).abs() < 1e-12);
    }

    #[test]
    fn auc_is_invariant_under_strictly_increasing_transforms(
        // Gridded scores guarantee that distinct values stay distinct after
        // any monotone f64 transform, while still producing plenty of ties.
        pairs in proptest::collection::vec((-640i32..640, any::<bool>()), 4..50),
        scale in 0.1f64..5.0,
        shift in -3.0f64..3.0,
    ) {
        let scores: Vec<f64> = pairs.iter().map(|(s, _)| *s as f64 / 64.0).collect();
        let labels: Vec<bool> = pairs.iter().map(|(_, l)| *l).collect();
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let base = roc_auc(&scores, &labels).unwrap().unwrap();
        // Affine and monotone-nonlinear transforms preserve ranking.
        let affine: Vec<f64> = scores.iter().map(|s| scale * s + shift).collect();
        let expd: Vec<f64> = scores.iter().map(|s| (s * 0.3).exp()).collect();
        prop_assert!((roc_auc(&affine, &labels).unwrap().unwrap() - base).abs() < 1e-12);
        prop_assert!((roc_auc(&expd, &labels).unwrap().unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn aggregated_soft_labels_stay_in_the_contributor_envelope(
        rows in 1usize..20,
        classes in 1usize..5,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let models: Vec<ReferencePredictions> = (0..4)
            .map(|i| ReferencePredictions {
                model_name: format!("m{i}"),
                model_hash: i,
                probs: (0..rows * classes).map(|_| rng.random_range(0.001..0.999)).collect(),
            })
            .collect();
        let ids: Vec<u64> = (0..rows as u64).collect();
        let out = aggregate_soft_labels(&models, &ids, classes).unwrap();
        for slot in 0..rows * classes {
            let lo = models.iter().map(|m| m.probs[slot]).fold(f64::MAX, f64::min);
            let hi = models.iter().map(|m| m.probs[slot]).fold(f64::MIN, f64::max);
            prop_assert!(out.values[slot] >= lo - 1e-12 && out.values[slot] <= hi + 1e-12);
        }
    }

    #[test]
    fn pool_similarities_are_monotone_and_sigma_free_in_order(
        rows in 3usize..30,
        classes in 1usize..4,
        seed in any::<u64>(),
        sigma in 0.3f64..3.0,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let dist = SoftLabelDistribution {
            classes,
            sample_ids: (0..rows as u64).collect(),
            values: (0..rows * classes).map(|_| rng.random_range(0.0..1.0)).collect(),
            source_hashes: vec![],
        };
        let k = 3.min(rows - 1);
        let pool = build_neighbor_pool(&dist, k, sigma).unwrap();
        let pool2 = build_neighbor_pool(&dist, k, 2.0 * sigma).unwrap();
        for (a, b) in pool.anchors.iter().zip(&pool2.anchors) {
            for w in a.neighbors.windows(2) {
                prop_assert!(w[0].dist_sq <= w[1].dist_sq);
                prop_assert!(w[0].similarity >= w[1].similarity);
            }
            // Doubling sigma keeps identity and order, and maps s to s^(1/4).
            for (x, y) in a.neighbors.iter().zip(&b.neighbors) {
                prop_assert_eq!(x.id, y.id);
                prop_assert!((y.similarity - x.similarity.powf(0.25)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lr_schedule_decays_by_thirds(base in 1e-5f64..1.0, epoch in 0usize..24) {
        let lr = lr_schedule(base, epoch);
        prop_assert!((lr - base / 3.0f64.powi((epoch / 2) as i32)).abs() < 1e-15);
        // Non-increasing in the epoch.
        prop_assert!(lr <= lr_schedule(base, epoch.saturating_sub(2)) + 1e-18);
    }
}
