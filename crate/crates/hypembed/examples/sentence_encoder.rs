//! Train the sentence encoder on a toy corpus: a bidirectional GRU encodes
//! each middle sentence onto the ball and is scored on predicting the words
//! of its neighboring sentences.
//!
//! ```bash
//! cargo run --release -p hypembed --example sentence_encoder
//! ```

use hypembed::sent::{perplexity, train_sent, SentConfig};

fn corpus() -> Vec<Vec<String>> {
    let text = [
        "the cat sat on the mat",
        "it watched the birds outside",
        "the birds sang in the tree",
        "a dog barked at the cat",
        "the cat ran up the tree",
        "the dog waited below it",
        "rain fell on the garden",
        "the birds hid from the rain",
        "the cat stayed inside all day",
        "the dog slept by the door",
    ];
    (0..12)
        .flat_map(|_| text.iter())
        .map(|s| s.split_whitespace().map(str::to_string).collect())
        .collect()
}

fn main() -> hypembed::Result<()> {
    let cfg = SentConfig {
        hidden_dim: 8,
        word_dim: 16,
        ball_dim: 6,
        epochs: 4,
        batch_size: 16,
        lr: 0.01,
        seed: 1,
        holdout_frac: 0.15,
        ..Default::default()
    };
    let run = train_sent(&corpus(), &cfg)?;

    println!(
        "holdout perplexity: {:.3} untrained -> {:.3} trained",
        run.untrained_perplexity.unwrap(),
        run.epochs.last().unwrap().holdout_perplexity.unwrap()
    );
    let (l1, l2) = run.model.lambdas();
    println!("learned distance weights: lambda1 (encoder) {l1:.3}, lambda2 (context) {l2:.3}");
    println!("holdout check: {:.3} via perplexity()", perplexity(&run.model, &run.holdout)?);

    println!("\nper-epoch token loss:");
    for e in &run.epochs {
        println!("  epoch {}: {:.4}", e.epoch, e.loss);
    }

    println!("\nsentence embeddings (first 3 coordinates, then norm):");
    for s in [
        "the cat sat on the mat",
        "the dog slept by the door",
        "markets unknown words here",
    ] {
        let tokens: Vec<String> = s.split_whitespace().map(str::to_string).collect();
        let p = run.model.encode(&tokens)?;
        let c = p.coords();
        println!("  {:<28} [{:+.3} {:+.3} {:+.3} ...]  |x| = {:.3}", s, c[0], c[1], c[2], p.norm());
    }
    Ok(())
}
