//! Embed the transitive closure of a small taxonomy and watch the hierarchy
//! appear in the norms: general terms end near the origin, specific ones
//! near the boundary.
//!
//! ```bash
//! cargo run --release -p hypembed --example tree_embedding
//! ```

use hypembed::corpus::EdgeList;
use hypembed::eval::reconstruction;
use hypembed::graph::{train, TrainConfig, TrainData};

/// (descendant, ancestor) pairs for a complete binary tree of the given
/// depth, closed under transitivity, nodes named by path.
fn closure_edges(depth: usize) -> Vec<(String, String)> {
    let mut names = vec!["root".to_string()];
    for i in 1..(1usize << (depth + 1)) - 1 {
        let parent = (i - 1) / 2;
        let side = if i % 2 == 1 { "l" } else { "r" };
        names.push(format!("{}{side}", names[parent]));
    }
    let mut edges = Vec::new();
    for i in 1..names.len() {
        let mut a = (i - 1) / 2;
        loop {
            edges.push((names[i].clone(), names[a].clone()));
            if a == 0 {
                break;
            }
            a = (a - 1) / 2;
        }
    }
    edges
}

fn main() -> hypembed::Result<()> {
    let pairs = closure_edges(4);
    let edges = EdgeList::from_pairs(pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())))?;
    println!(
        "binary tree, depth 4, transitive closure: {} nodes, {} pairs",
        edges.node_count(),
        edges.edge_count()
    );

    let cfg = TrainConfig {
        dim: 10,
        epochs: 800,
        batch_size: 64,
        lr: 0.02,
        negatives: 10,
        seed: 7,
        ..Default::default()
    };
    let data = TrainData::Edges(edges);
    let run = train(&data, &cfg)?;
    let emb = run.table.realize_all()?;

    let (edges, report) = match &data {
        TrainData::Edges(e) => (e, reconstruction(&emb, e.edges(), cfg.metric)?),
        _ => unreachable!(),
    };
    println!(
        "after {} epochs: mean rank {:.3}, MAP {:.3}\n",
        cfg.epochs, report.mean_rank, report.map
    );

    println!("norm by depth (depth = name length in l/r steps):");
    let mut by_depth: Vec<(usize, Vec<f64>)> = Vec::new();
    for id in 0..edges.node_count() as u32 {
        let depth = edges.node_name(id).len().saturating_sub(4); // "root" prefix
        let norm = emb.point(id).iter().map(|c| c * c).sum::<f64>().sqrt();
        if by_depth.len() <= depth {
            by_depth.resize(depth + 1, (0, Vec::new()));
        }
        by_depth[depth].0 = depth;
        by_depth[depth].1.push(norm);
    }
    for (depth, norms) in &by_depth {
        let mean = norms.iter().sum::<f64>() / norms.len() as f64;
        let bar = "#".repeat((mean * 40.0) as usize);
        println!("  depth {depth}: mean |x| = {mean:.3}  {bar}");
    }
    Ok(())
}
