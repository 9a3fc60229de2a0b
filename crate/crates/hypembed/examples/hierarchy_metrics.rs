//! The evaluation toolbox on hand-built embeddings: reconstruction ranks,
//! the norm-sensitive is-a score, and Spearman correlation with ties.
//!
//! ```bash
//! cargo run --release -p hypembed --example hierarchy_metrics
//! ```

use hypembed::ball::BallPoint;
use hypembed::eval::{
    hyperlex_score, nearest_neighbors, reconstruction, spearman, EmbeddingSet, NeighborMetric,
};

fn main() -> hypembed::Result<()> {
    // a hand-placed hierarchy: root near the origin, parents mid-radius,
    // leaves close to the boundary in their parent's direction
    let dim = 2;
    #[rustfmt::skip]
    let flat = vec![
         0.0100,  0.0000,   // 0 root
         0.7000,  0.0000,   // 1
        -0.7000,  0.0000,   // 2
         0.8955,  0.0899,   // 3
         0.8955, -0.0899,   // 4
        -0.8955,  0.0899,   // 5
        -0.8955, -0.0899,   // 6
    ];
    let emb = EmbeddingSet::from_flat(dim, flat.clone())?;
    let edges = [(0u32, 1u32), (0, 2), (1, 3), (1, 4), (2, 5), (2, 6)];

    let r = reconstruction(&emb, &edges, hypembed::ball::Metric::Hyperbolic)?;
    println!("reconstruction over {} pairs: mean rank {:.3}, MAP {:.3}", r.pairs, r.mean_rank, r.map);

    println!("\nneighbors of node 1:");
    for (metric, label) in [(NeighborMetric::Hyperbolic, "hyperbolic"), (NeighborMetric::Cosine, "cosine")] {
        let nn = nearest_neighbors(&emb, 1, 3, metric)?;
        let ids: Vec<String> = nn.iter().map(|(i, d)| format!("{i} ({d:.3})")).collect();
        println!("  {label:<10} {}", ids.join(", "));
    }

    // is-a score: positive alpha rewards the general term having the
    // smaller norm, so score(specific, general) > score(general, specific)
    let root = BallPoint::new(flat[0..2].to_vec())?;
    let leaf = BallPoint::new(flat[6..8].to_vec())?;
    let alpha = 1000.0;
    println!("\nis-a score, alpha = {alpha}:");
    println!("  is-a(leaf 3, root) = {:>9.2}", hyperlex_score(&leaf, &root, alpha));
    println!("  is-a(root, leaf 3) = {:>9.2}", hyperlex_score(&root, &leaf, alpha));

    // Spearman is rank-based: any monotone warp leaves it at 1
    let xs = [1.0f64, 2.0, 3.0, 4.0, 5.0];
    let warped: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
    let noisy = [1.0, 3.0, 2.0, 5.0, 4.0];
    println!("\nspearman(x, exp(x)) = {:.3}", spearman(&xs, &warped)?);
    println!("spearman(x, swapped pairs) = {:.3}", spearman(&xs, &noisy)?);
    Ok(())
}
