//! Fixed K-nearest-neighbor pool in soft-label space.
//!
//! Neighbors are found by exact brute-force search under squared Euclidean
//! distance on the soft label vectors, with similarity
//! `s = exp(-dist^2 / (2 sigma^2))` attached to each listed neighbor.
//! Candidates outside the K-nearest set carry similarity 0 in every loss.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use crate::bytes::{self, Cursor, Payload};
use crate::error::{Error, Result};
use crate::labels::SoftLabelDistribution;

const POOL_MAGIC: &[u8; 8] = b"MODLPOL1";

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborRef {
    pub id: u64,
    pub dist_sq: f64,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorNeighbors {
    pub anchor_id: u64,
    /// Sorted by ascending distance, ties by ascending id; excludes the anchor.
    pub neighbors: Vec<NeighborRef>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborPool {
    pub k: usize,
    pub sigma: f64,
    pub anchors: Vec<AnchorNeighbors>,
    /// Set when the requested K exceeded n-1 and was clamped.
    pub k_was_clamped: bool,
}

impl NeighborPool {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// Anchor-id index for coverage checks and batch assembly.
    pub fn id_index(&self) -> HashMap<u64, usize> {
        self.anchors
            .iter()
            .enumerate()
            .map(|(i, a)| (a.anchor_id, i))
            .collect()
    }

    pub fn content_hash(&self) -> u64 {
        let mut h = bytes::Fnv1a::new();
        h.update_u64(self.k as u64);
        h.update_f64(self.sigma);
        h.update_u64(self.anchors.len() as u64);
        for a in &self.anchors {
            h.update_u64(a.anchor_id);
            for n in &a.neighbors {
                h.update_u64(n.id);
                h.update_f64(n.dist_sq);
                h.update_f64(n.similarity);
            }
        }
        h.finish()
    }
}

/// Gaussian local similarity between two soft label vectors.
pub fn local_similarity(a: &[f64], b: &[f64], sigma: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::contract(format!(
            "local_similarity length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if sigma <= 0.0 {
        return Err(Error::contract("local_similarity requires sigma > 0"));
    }
    let dist_sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(similarity_from_dist_sq(dist_sq, sigma))
}

fn similarity_from_dist_sq(dist_sq: f64, sigma: f64) -> f64 {
    (-dist_sq / (2.0 * sigma * sigma)).exp()
}

/// Build the pool by exact brute-force search. `k` greater than `n - 1` is
/// clamped with a recorded warning; the anchor itself is excluded.
pub fn build_neighbor_pool(
    dist: &SoftLabelDistribution,
    k: usize,
    sigma: f64,
) -> Result<NeighborPool> {
    build_neighbor_pool_with(dist, k, sigma, false)
}

/// [`build_neighbor_pool`] with self-inclusion toggleable. Including the
/// anchor adds a degenerate zero-loss term, so the default excludes it.
pub fn build_neighbor_pool_with(
    dist: &SoftLabelDistribution,
    k: usize,
    sigma: f64,
    include_self: bool,
) -> Result<NeighborPool> {
    let n = dist.len();
    if n < 2 {
        return Err(Error::contract(format!(
            "neighbor pool needs at least 2 samples, got {n}"
        )));
    }
    if k == 0 {
        return Err(Error::contract("neighbor pool needs K >= 1"));
    }
    if sigma <= 0.0 {
        return Err(Error::contract("neighbor pool requires sigma > 0"));
    }
    let max_k = if include_self { n } else { n - 1 };
    let k_was_clamped = k > max_k;
    let k_eff = k.min(max_k);
    if k_was_clamped {
        log::warn!("neighbor pool: K={k} exceeds available candidates; clamped to {k_eff}");
    }

    let anchors: Vec<AnchorNeighbors> = (0..n)
        .into_par_iter()
        .map(|i| {
            let anchor_row = dist.row(i);
            let mut candidates: Vec<(u64, f64)> = Vec::with_capacity(n - 1);
            for j in 0..n {
                if j == i && !include_self {
                    continue;
                }
                let other = dist.row(j);
                let d2: f64 = anchor_row
                    .iter()
                    .zip(other)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                candidates.push((dist.sample_ids[j], d2));
            }
            candidates.sort_by(|a, b| {
                a.1.partial_cmp(&b.1)
                    .expect("soft label distances are finite")
                    .then(a.0.cmp(&b.0))
            });
            candidates.truncate(k_eff);
            AnchorNeighbors {
                anchor_id: dist.sample_ids[i],
                neighbors: candidates
                    .into_iter()
                    .map(|(id, d2)| NeighborRef {
                        id,
                        dist_sq: d2,
                        similarity: similarity_from_dist_sq(d2, sigma),
                    })
                    .collect(),
            }
        })
        .collect();

    Ok(NeighborPool {
        k: k_eff,
        sigma,
        anchors,
        k_was_clamped,
    })
}

/// Persist a pool with the same binary framing as the soft-label file.
pub fn write_pool(pool: &NeighborPool, path: &Path) -> Result<()> {
    let mut p = Payload::new();
    p.put_u32(pool.k as u32);
    p.put_u32(u32::from(pool.k_was_clamped));
    p.put_f64(pool.sigma);
    p.put_u64(pool.anchors.len() as u64);
    for a in &pool.anchors {
        p.put_u64(a.anchor_id);
        p.put_u32(a.neighbors.len() as u32);
        for n in &a.neighbors {
            p.put_u64(n.id);
            p.put_f64(n.dist_sq);
            p.put_f64(n.similarity);
        }
    }
    bytes::write_framed(path, POOL_MAGIC, &p.into_bytes())
}

pub fn read_pool(path: &Path) -> Result<NeighborPool> {
    let payload = bytes::read_framed(path, POOL_MAGIC)?;
    let mut c = Cursor::new(path, &payload);
    let k = c.get_u32()? as usize;
    let k_was_clamped = c.get_u32()? != 0;
    let sigma = c.get_f64()?;
    let n = c.get_u64()? as usize;
    let mut anchors = Vec::with_capacity(n);
    for _ in 0..n {
        let anchor_id = c.get_u64()?;
        let count = c.get_u32()? as usize;
        let mut neighbors = Vec::with_capacity(count);
        for _ in 0..count {
            neighbors.push(NeighborRef {
                id: c.get_u64()?,
                dist_sq: c.get_f64()?,
                similarity: c.get_f64()?,
            });
        }
        anchors.push(AnchorNeighbors { anchor_id, neighbors });
    }
    c.expect_end()?;
    Ok(NeighborPool {
        k,
        sigma,
        anchors,
        k_was_clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist_from(values: Vec<Vec<f64>>) -> SoftLabelDistribution {
        let classes = values[0].len();
        SoftLabelDistribution {
            classes,
            sample_ids: (0..values.len() as u64).collect(),
            values: values.into_iter().flatten().collect(),
            source_hashes: vec![],
        }
    }

    #[test]
    fn identical_vectors_have_similarity_one() {
        let s = local_similarity(&[0.2, 0.8], &[0.2, 0.8], 1.0).unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn orthogonal_unit_rows_give_exp_minus_one() {
        let s = local_similarity(&[1.0, 0.0], &[0.0, 1.0], 1.0).unwrap();
        assert!((s - (-1.0f64).exp()).abs() < 1e-15);
        assert!((s - 0.36787944117144233).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_is_contract_error() {
        assert!(local_similarity(&[0.1], &[0.1, 0.2], 1.0).is_err());
        assert!(local_similarity(&[0.1], &[0.1], 0.0).is_err());
    }

    #[test]
    fn three_samples_list_the_other_two_sorted() {
        let d = dist_from(vec![vec![0.0, 0.0], vec![0.3, 0.0], vec![1.0, 1.0]]);
        let pool = build_neighbor_pool(&d, 2, 1.0).unwrap();
        assert_eq!(pool.anchors[0].neighbors[0].id, 1);
        assert_eq!(pool.anchors[0].neighbors[1].id, 2);
        assert!((pool.anchors[0].neighbors[0].dist_sq - 0.09).abs() < 1e-15);
        assert_eq!(pool.anchors[1].neighbors[0].id, 0);
        assert_eq!(pool.anchors[2].neighbors[0].id, 1);
        for a in &pool.anchors {
            assert!(a.neighbors.iter().all(|n| n.id != a.anchor_id));
        }
    }

    #[test]
    fn identical_rows_are_mutual_first_neighbors_with_s_one() {
        let d = dist_from(vec![vec![0.4, 0.6], vec![0.4, 0.6]]);
        let pool = build_neighbor_pool(&d, 1, 1.0).unwrap();
        assert_eq!(pool.anchors[0].neighbors[0].id, 1);
        assert_eq!(pool.anchors[0].neighbors[0].similarity, 1.0);
        assert_eq!(pool.anchors[1].neighbors[0].id, 0);
        assert_eq!(pool.anchors[1].neighbors[0].similarity, 1.0);
    }

    #[test]
    fn duplicate_distances_break_ties_by_id() {
        // Anchors 1, 2, 3 all at distance 0 from anchor 0.
        let d = dist_from(vec![
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            vec![0.5, 0.5],
        ]);
        let pool = build_neighbor_pool(&d, 3, 1.0).unwrap();
        let ids: Vec<u64> = pool.anchors[0].neighbors.iter().map(|n| n.id).collect();
        assert_eq!(ids, vec![1, 2, 3]);
        let ids: Vec<u64> = pool.anchors[2].neighbors.iter().map(|n| n.id).collect();
        assert_eq!(ids, vec![0, 1, 3]);
    }

    #[test]
    fn oversized_k_is_clamped_and_flagged() {
        let d = dist_from(vec![vec![0.1], vec![0.9], vec![0.4]]);
        let pool = build_neighbor_pool(&d, 10, 1.0).unwrap();
        assert_eq!(pool.k, 2);
        assert!(pool.k_was_clamped);
        assert!(pool.anchors.iter().all(|a| a.neighbors.len() == 2));
    }

    #[test]
    fn similarities_are_non_increasing_within_anchor() {
        let d = dist_from(vec![
            vec![0.0, 0.1],
            vec![0.2, 0.9],
            vec![0.7, 0.3],
            vec![0.5, 0.5],
            vec![0.9, 0.05],
        ]);
        let pool = build_neighbor_pool(&d, 4, 0.7).unwrap();
        for a in &pool.anchors {
            for w in a.neighbors.windows(2) {
                assert!(w[0].similarity >= w[1].similarity);
                assert!(w[0].dist_sq <= w[1].dist_sq);
            }
        }
    }

    #[test]
    fn doubling_sigma_takes_fourth_root_of_similarity() {
        let d = dist_from(vec![
            vec![0.0, 0.1],
            vec![0.2, 0.9],
            vec![0.7, 0.3],
            vec![0.5, 0.5],
        ]);
        let p1 = build_neighbor_pool(&d, 3, 1.0).unwrap();
        let p2 = build_neighbor_pool(&d, 3, 2.0).unwrap();
        for (a1, a2) in p1.anchors.iter().zip(&p2.anchors) {
            for (n1, n2) in a1.neighbors.iter().zip(&a2.neighbors) {
                // Selection is distance-based, so identity and order agree.
                assert_eq!(n1.id, n2.id);
                assert_eq!(n1.dist_sq, n2.dist_sq);
                assert!((n2.similarity - n1.similarity.powf(0.25)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn include_self_lists_anchor_first() {
        let d = dist_from(vec![vec![0.1, 0.2], vec![0.8, 0.9]]);
        let pool = build_neighbor_pool_with(&d, 2, 1.0, true).unwrap();
        assert_eq!(pool.anchors[0].neighbors[0].id, 0);
        assert_eq!(pool.anchors[0].neighbors[0].similarity, 1.0);
        assert_eq!(pool.anchors[0].neighbors[1].id, 1);
    }

    #[test]
    fn pool_file_round_trip_is_exact() {
        let d = dist_from(vec![
            vec![0.0, 0.1],
            vec![0.2, 0.9],
            vec![0.7, 0.3],
            vec![0.5, 0.5],
        ]);
        let pool = build_neighbor_pool(&d, 2, 1.3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.bin");
        write_pool(&pool, &path).unwrap();
        let back = read_pool(&path).unwrap();
        assert_eq!(pool, back);
        assert_eq!(pool.content_hash(), back.content_hash());
    }

    #[test]
    fn tiny_inputs_rejected() {
        let d = dist_from(vec![vec![0.5]]);
        assert!(build_neighbor_pool(&d, 1, 1.0).is_err());
        let d = dist_from(vec![vec![0.5], vec![0.6]]);
        assert!(build_neighbor_pool(&d, 0, 1.0).is_err());
        assert!(build_neighbor_pool(&d, 1, -1.0).is_err());
    }
}
