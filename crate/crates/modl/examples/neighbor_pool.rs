//! The fixed K-nearest-neighbor pool: exact brute-force search in
//! soft-label space with Gaussian local similarity.
//!
//! ```bash
//! cargo run -p modl --example neighbor_pool
//! ```

use modl::labels::SoftLabelDistribution;
use modl::neighbors::{build_neighbor_pool, local_similarity, read_pool, write_pool};

fn main() -> modl::Result<()> {
    // A hand-made soft label distribution: two tight groups and an outlier.
    let rows: Vec<Vec<f64>> = vec![
        vec![0.9, 0.1, 0.8], // 0: group A
        vec![0.88, 0.12, 0.79], // 1: group A
        vec![0.91, 0.08, 0.82], // 2: group A
        vec![0.1, 0.9, 0.2], // 3: group B
        vec![0.12, 0.88, 0.19], // 4: group B
        vec![0.5, 0.5, 0.5], // 5: outlier
    ];
    let dist = SoftLabelDistribution {
        classes: 3,
        sample_ids: (0..rows.len() as u64).collect(),
        values: rows.iter().flatten().copied().collect(),
        source_hashes: vec![],
    };

    let sim = local_similarity(&rows[0], &rows[1], 1.0)?;
    println!("similarity of two group-A rows at sigma 1: {sim:.4}");
    let sim = local_similarity(&rows[0], &rows[3], 1.0)?;
    println!("similarity across groups:                  {sim:.4}");

    let pool = build_neighbor_pool(&dist, 2, 1.0)?;
    println!("\nanchor  neighbors (id, dist^2, similarity)");
    for anchor in &pool.anchors {
        let entries: Vec<String> = anchor
            .neighbors
            .iter()
            .map(|n| format!("({}, {:.3}, {:.3})", n.id, n.dist_sq, n.similarity))
            .collect();
        println!("{:>6}  {}", anchor.anchor_id, entries.join("  "));
    }

    // Wider kernels flatten the similarity profile without reordering it.
    let wide = build_neighbor_pool(&dist, 2, 2.0)?;
    let narrow = &pool.anchors[0].neighbors;
    let wider = &wide.anchors[0].neighbors;
    println!(
        "\nsigma 1 vs sigma 2 for anchor 0: {:.3} -> {:.3} (same neighbor {})",
        narrow[0].similarity, wider[0].similarity, narrow[0].id == wider[0].id
    );

    let dir = tempfile::tempdir().map_err(modl::Error::Io)?;
    let path = dir.path().join("pool.bin");
    write_pool(&pool, &path)?;
    let restored = read_pool(&path)?;
    println!(
        "pool persisted and restored bit-exactly: {}",
        restored.content_hash() == pool.content_hash()
    );
    Ok(())
}
