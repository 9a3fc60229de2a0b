//! Word embeddings from windowed co-occurrence counts: frequent words drift
//! toward the origin, and cosine neighbors stay meaningful even though raw
//! hyperbolic neighbors would be dominated by norm.
//!
//! ```bash
//! cargo run --release -p hypembed --example word_cooccurrence
//! ```

use hypembed::corpus::{build_cooc, tokenize, CoocConfig};
use hypembed::eval::{nearest_neighbors, norm_freq_corr, NeighborMetric};
use hypembed::graph::{train, TrainConfig, TrainData};

fn main() -> hypembed::Result<()> {
    // a tiny synthetic corpus with two topical clusters and shared function
    // words; repetition gives the counts something to work with
    let doc = "the cat chased the mouse . the dog chased the cat . \
               a mouse fears the cat and the dog . \
               stocks rose as markets rallied . traders sold stocks when markets fell . \
               the traders watched markets all day . "
        .repeat(120);
    let tokens = tokenize(&doc, true);
    let cfg = CoocConfig {
        window: 5,
        downsample: 0.25,
        max_types: None,
        min_count: 5,
    };
    let cooc = build_cooc(&tokens, &cfg, &Default::default())?;
    println!(
        "{} tokens -> {} types, {} weighted pairs",
        tokens.len(),
        cooc.vocab.len(),
        cooc.len()
    );

    let tcfg = TrainConfig {
        dim: 8,
        epochs: 30,
        batch_size: 256,
        lr: 0.01,
        negatives: 10,
        seed: 3,
        ..Default::default()
    };
    let vocab = cooc.vocab.clone();
    let run = train(&TrainData::Cooc(cooc), &tcfg)?;
    let emb = run.table.realize_all()?;

    let rho = norm_freq_corr(&emb, vocab.freqs())?;
    println!("Spearman(1/frequency, hyperbolic norm) = {rho:.3}\n");

    println!("{:<10} {:>6} {:>8}   nearest by cosine", "word", "freq", "|x|");
    let mut ids: Vec<u32> = (0..vocab.len() as u32).collect();
    ids.sort_by_key(|&i| std::cmp::Reverse(vocab.freq(i)));
    for &id in ids.iter().take(8) {
        let norm = emb.point(id).iter().map(|c| c * c).sum::<f64>().sqrt();
        let nn = nearest_neighbors(&emb, id, 3, NeighborMetric::Cosine)?;
        let names: Vec<&str> = nn.iter().map(|(i, _)| vocab.token(*i)).collect();
        println!(
            "{:<10} {:>6} {:>8.3}   {}",
            vocab.token(id),
            vocab.freq(id),
            norm,
            names.join(", ")
        );
    }
    Ok(())
}
