//! Read bracketed constituency trees, then test whether a trained sentence
//! encoder puts taller spans (more general content) nearer the origin.
//!
//! ```bash
//! cargo run --release -p hypembed --example parse_trees
//! ```

use hypembed::eval::tree_height_corr;
use hypembed::sent::{train_sent, SentConfig};
use hypembed::trees::parse_bracketed;

const TREES: &str = "\
(S (NP (DT the) (NN cat)) (VP (VBD sat) (PP (IN on) (NP (DT the) (NN mat)))))
(S (NP (DT the) (NN dog)) (VP (VBD chased) (NP (DT the) (NN cat))))
(S (NP (DT the) (NN birds)) (VP (VBD sang) (PP (IN in) (NP (DT the) (NN tree)))))
";

fn main() -> hypembed::Result<()> {
    let trees = parse_bracketed(TREES)?;
    println!("parsed {} trees; first one:", trees.len());
    println!("{}", trees[0].render());
    println!("height {}, span: {}", trees[0].height(), trees[0].span().join(" "));

    println!("\nnodes of the first tree:");
    for node in trees[0].nodes() {
        println!("  h={} {:<24} {}", node.height(), node.label, node.span().join(" "));
    }

    // train a small encoder on related text so spans embed meaningfully
    let text = [
        "the cat sat on the mat",
        "the dog chased the cat",
        "the birds sang in the tree",
        "the cat watched the birds",
        "the dog sat by the tree",
    ];
    let sentences: Vec<Vec<String>> = (0..20)
        .flat_map(|_| text.iter())
        .map(|s| s.split_whitespace().map(str::to_string).collect())
        .collect();
    let cfg = SentConfig {
        hidden_dim: 6,
        word_dim: 12,
        ball_dim: 5,
        epochs: 3,
        batch_size: 16,
        lr: 0.01,
        seed: 4,
        holdout_frac: 0.0,
        ..Default::default()
    };
    let run = train_sent(&sentences, &cfg)?;

    let report = tree_height_corr(&trees, |span| {
        let tokens: Vec<String> = span.iter().map(|s| s.to_string()).collect();
        Ok(run.model.encode(&tokens)?.coords().to_vec())
    })?;
    println!(
        "\nSpearman(node height, embedding norm) over {} nodes: {:.3}",
        report.nodes, report.rho
    );
    println!("(leaves are height 0; negative rho means taller spans sit nearer the origin)");
    Ok(())
}
