//! Command-line surface: train, evaluate, query and export embeddings.
//!
//! Machine-readable output (JSON reports, TSV tables, CSV logs) goes to
//! stdout or files; progress and warnings go to stderr via the logger. Every
//! training run writes its fully-resolved config next to the checkpoint, so
//! a run can be reproduced from its artifacts alone.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::ball::Metric;
use crate::checkpoint;
use crate::corpus::{self, CoocConfig, Vocab};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, NeighborMetric};
use crate::graph::{self, TrainConfig, TrainData};
use crate::sent::{self, SentConfig, SentModel};

#[derive(Parser)]
#[command(
    name = "hypembed",
    version,
    about = "Poincare-ball embeddings for graphs, words, and sentences",
    after_help = "Defaults follow the reference setup: graph training uses dim 20, lr 0.005, \
                  10 negatives; co-occurrence extraction uses window 5, downsample 0.25; \
                  sentence training uses lr 0.0008 halved every 100k steps, 512 sampled \
                  negatives, norm bias init -2."
)]
pub struct Cli {
    /// Worker threads. This build always computes sequentially; values
    /// above 1 are accepted and ignored with a warning.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Force sequential, bit-reproducible reductions (always on here).
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Learn node embeddings from an edge list, or word embeddings from a
    /// text corpus via windowed co-occurrence counts.
    TrainGraph(TrainGraphArgs),
    /// Train the sentence encoder on a one-sentence-per-line corpus.
    TrainSent(TrainSentArgs),
    /// Run an evaluation task against a checkpoint; prints a JSON report.
    Eval(EvalArgs),
    /// Nearest neighbors of a vocabulary item, as TSV rows.
    Neighbors(NeighborsArgs),
    /// Dump realized embeddings as TSV (token, coordinates, norm).
    Export(ExportArgs),
}

pub fn run() -> Result<()> {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t > 1 {
            log::warn!("--threads {t} requested, but this build computes sequentially");
        }
    }
    match cli.cmd {
        Cmd::TrainGraph(a) => cmd_train_graph(a),
        Cmd::TrainSent(a) => cmd_train_sent(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Neighbors(a) => cmd_neighbors(a),
        Cmd::Export(a) => cmd_export(a),
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn parse_metric(s: &str) -> Result<Metric> {
    Metric::from_str(s)
}

// ---------------------------------------------------------------------------
// train-graph

#[derive(Args)]
struct TrainGraphArgs {
    /// Edge list file: one "parent<TAB>child" (or whitespace) pair per line.
    #[arg(long, required_unless_present = "corpus", conflicts_with = "corpus")]
    edges: Option<PathBuf>,
    /// Plain-text corpus; trains on co-occurrence pairs instead of edges.
    #[arg(long)]
    corpus: Option<PathBuf>,

    /// Co-occurrence window (corpus mode).
    #[arg(long)]
    window: Option<usize>,
    /// Keep a pair at distance k with weight k^-downsample (corpus mode).
    #[arg(long)]
    downsample: Option<f64>,
    /// Stopword list, one token per line, removed before pairing.
    #[arg(long)]
    stopwords: Option<PathBuf>,
    /// Keep only the most frequent types (corpus mode).
    #[arg(long)]
    max_types: Option<usize>,
    /// Drop types rarer than this (corpus mode).
    #[arg(long)]
    min_count: Option<u64>,
    /// Lowercase and strip to a-z before tokenizing.
    #[arg(long)]
    text8_normalize: bool,

    /// JSON file with a (possibly partial) training config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: GraphFlags,

    /// Output directory: checkpoint, epochs.csv, resolved_config.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GraphFlags {
    /// Ball dimension.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Negative samples per positive pair.
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    clip_norm: Option<f64>,
    /// "hyperbolic" or "euclidean".
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Initial epochs at a tenth of the learning rate.
    #[arg(long)]
    burn_in_epochs: Option<usize>,
    /// Run reconstruction every k epochs (edge mode; 0 = never).
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    init_dir_range: Option<f64>,
    #[arg(long)]
    init_norm_value: Option<f64>,
}

impl GraphFlags {
    fn overlay(&self, cfg: &mut TrainConfig) -> Result<()> {
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            };
        }
        set!(dim);
        set!(epochs);
        set!(batch_size);
        set!(lr);
        set!(negatives);
        set!(clip_norm);
        set!(seed);
        set!(burn_in_epochs);
        set!(eval_every);
        set!(init_dir_range);
        set!(init_norm_value);
        if let Some(m) = &self.metric {
            cfg.metric = parse_metric(m)?;
        }
        Ok(())
    }
}

fn resolve_graph_config(config: &Option<PathBuf>, flags: &GraphFlags) -> Result<TrainConfig> {
    let mut cfg = match config {
        Some(path) => serde_json::from_str(&read_to_string(path)?)?,
        None => TrainConfig::default(),
    };
    flags.overlay(&mut cfg)?;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train_graph(a: TrainGraphArgs) -> Result<()> {
    let cfg = resolve_graph_config(&a.config, &a.flags)?;
    let (data, vocab) = match (&a.edges, &a.corpus) {
        (Some(path), None) => {
            let edges = corpus::load_edge_list(path)?;
            let n = edges.node_count();
            let vocab = Vocab::from_parts(edges.nodes().to_vec(), vec![1; n], None)?;
            (TrainData::Edges(edges), vocab)
        }
        (None, Some(path)) => {
            let stop = match &a.stopwords {
                Some(p) => corpus::load_stopwords(p)?,
                None => Default::default(),
            };
            let mut cc = CoocConfig::default();
            if let Some(w) = a.window {
                cc.window = w;
            }
            if let Some(d) = a.downsample {
                cc.downsample = d;
            }
            cc.max_types = a.max_types.or(cc.max_types);
            if let Some(m) = a.min_count {
                cc.min_count = m;
            }
            let tokens = corpus::tokenize(&read_to_string(path)?, a.text8_normalize);
            let cooc = corpus::build_cooc(&tokens, &cc, &stop)?;
            let vocab = cooc.vocab.clone();
            (TrainData::Cooc(cooc), vocab)
        }
        _ => unreachable!("clap enforces exactly one input"),
    };

    log::info!(
        "training {} nodes, dim {}, {} epochs",
        data.node_count(),
        cfg.dim,
        cfg.epochs
    );
    let run = graph::train(&data, &cfg)?;
    if run.degenerate_pairs > 0 {
        log::warn!("{} coincident pairs contributed no gradient", run.degenerate_pairs);
    }
    if run.dir_reinits > 0 {
        log::warn!("{} degenerate directions re-initialized", run.dir_reinits);
    }

    fs::create_dir_all(&a.out)?;
    checkpoint::save_graph(&a.out, &run.table, &vocab, &cfg, run.steps)?;
    write_resolved_config(&a.out, &serde_json::to_value(&cfg)?)?;
    let mut csv = String::from("epoch,loss,mean_rank,map\n");
    for e in &run.epochs {
        let mr = e.mean_rank.map(|v| v.to_string()).unwrap_or_default();
        let map = e.map.map(|v| v.to_string()).unwrap_or_default();
        csv.push_str(&format!("{},{},{},{}\n", e.epoch, e.loss, mr, map));
    }
    fs::write(a.out.join("epochs.csv"), csv)?;
    log::info!("checkpoint written to {}", a.out.display());
    Ok(())
}

fn write_resolved_config(dir: &Path, cfg: &serde_json::Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(cfg)?;
    s.push('\n');
    fs::write(dir.join("resolved_config.json"), s)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// train-sent

#[derive(Args)]
struct TrainSentArgs {
    /// One-sentence-per-line text file.
    #[arg(long)]
    corpus: PathBuf,
    /// Lowercase and strip to a-z before tokenizing.
    #[arg(long)]
    text8_normalize: bool,
    /// JSON file with a (possibly partial) config; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// GRU hidden size per direction; the sentence code is twice this wide.
    #[arg(long)]
    encoder_dim: Option<usize>,
    /// Word embedding width (must be 2 * encoder_dim; defaults to it).
    #[arg(long)]
    word_dim: Option<usize>,
    #[arg(long)]
    ball_dim: Option<usize>,
    /// Per-gate layer normalization ("true"/"false").
    #[arg(long)]
    layer_norm: Option<bool>,
    /// "hyperbolic" or "euclidean".
    #[arg(long)]
    metric: Option<String>,
    /// Context words on each side of a predicted token.
    #[arg(long)]
    context_window: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Steps over which the learning rate halves.
    #[arg(long)]
    lr_halflife_steps: Option<f64>,
    /// Sampled-softmax negatives per token (large vocabularies only).
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_types: Option<usize>,
    #[arg(long)]
    min_count: Option<u64>,
    /// Add one synthetic triple per real one, re-split from the flat stream.
    #[arg(long)]
    augment: bool,
    /// Fraction of triples held out for perplexity tracking.
    #[arg(long)]
    holdout_frac: Option<f64>,
    #[arg(long)]
    norm_bias_init: Option<f64>,

    /// Output directory: checkpoint, epochs.csv, resolved_config.json.
    #[arg(long)]
    out: PathBuf,
}

fn resolve_sent_config(a: &TrainSentArgs) -> Result<SentConfig> {
    let mut cfg: SentConfig = match &a.config {
        Some(path) => serde_json::from_str(&read_to_string(path)?)?,
        None => SentConfig::default(),
    };
    if let Some(h) = a.encoder_dim {
        cfg.hidden_dim = h;
        cfg.word_dim = a.word_dim.unwrap_or(2 * h);
    } else if let Some(w) = a.word_dim {
        cfg.word_dim = w;
    }
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = a.$field {
                cfg.$field = v;
            }
        };
    }
    set!(ball_dim);
    set!(layer_norm);
    set!(context_window);
    set!(epochs);
    set!(batch_size);
    set!(lr);
    set!(lr_halflife_steps);
    set!(negatives);
    set!(clip_norm);
    set!(seed);
    set!(max_types);
    set!(min_count);
    set!(holdout_frac);
    set!(norm_bias_init);
    if a.augment {
        cfg.augment = true;
    }
    if let Some(m) = &a.metric {
        cfg.metric = parse_metric(m)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train_sent(a: TrainSentArgs) -> Result<()> {
    let cfg = resolve_sent_config(&a)?;
    let sentences = corpus::load_sentences(&a.corpus, a.text8_normalize)?;
    log::info!("{} sentences loaded from {}", sentences.len(), a.corpus.display());
    let run = sent::train_sent(&sentences, &cfg)?;
    if let Some(p) = run.untrained_perplexity {
        log::info!("holdout perplexity before training: {p:.3}");
    }
    if run.degenerate_pairs > 0 {
        log::warn!("{} coincident pairs contributed no gradient", run.degenerate_pairs);
    }

    fs::create_dir_all(&a.out)?;
    let cfg_json = serde_json::to_value(&cfg)?;
    checkpoint::save_sent(
        &a.out,
        &run.model.params,
        &run.model.layout.groups(),
        &run.model.vocab,
        &cfg_json,
        run.steps,
    )?;
    write_resolved_config(&a.out, &cfg_json)?;
    let mut csv = String::from("epoch,loss,holdout_perplexity,lambda1,lambda2\n");
    for e in &run.epochs {
        let ppl = e.holdout_perplexity.map(|v| v.to_string()).unwrap_or_default();
        csv.push_str(&format!("{},{},{},{},{}\n", e.epoch, e.loss, ppl, e.lambda1, e.lambda2));
    }
    fs::write(a.out.join("epochs.csv"), csv)?;
    log::info!("checkpoint written to {}", a.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint directory from train-graph or train-sent.
    #[arg(long)]
    checkpoint: PathBuf,
    /// reconstruction | wordsim | hyperlex | norm-freq | tree-height
    #[arg(long)]
    task: String,
    /// Edge list for reconstruction, named in checkpoint vocabulary terms.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// "w1<TAB>w2<TAB>score" file for wordsim / hyperlex.
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// Bracketed parse trees for tree-height.
    #[arg(long)]
    trees: Option<PathBuf>,
    /// Norm-difference weight in the is-a score.
    #[arg(long, default_value_t = 1000.0)]
    alpha: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Loaded {
    Graph(checkpoint::GraphCheckpoint),
    Sent(Box<SentModel>),
}

fn load_any(dir: &Path) -> Result<Loaded> {
    match checkpoint::checkpoint_kind(dir)?.as_str() {
        "graph" => Ok(Loaded::Graph(checkpoint::load_graph(dir)?)),
        "sent" => Ok(Loaded::Sent(Box::new(SentModel::from_checkpoint(
            checkpoint::load_sent(dir)?,
        )?))),
        other => Err(Error::Checkpoint(format!("unknown checkpoint kind {other:?}"))),
    }
}

/// Word-level view of either checkpoint kind: realized points plus vocab.
fn word_view(loaded: &Loaded) -> Result<(eval::EmbeddingSet, &Vocab, serde_json::Value)> {
    match loaded {
        Loaded::Graph(g) => Ok((
            g.table.realize_all()?,
            &g.vocab,
            serde_json::to_value(&g.config)?,
        )),
        Loaded::Sent(m) => Ok((
            m.word_embeddings()?,
            &m.vocab,
            serde_json::to_value(&m.cfg)?,
        )),
    }
}

fn require<'a>(opt: &'a Option<PathBuf>, flag: &str, task: &str) -> Result<&'a PathBuf> {
    opt.as_ref()
        .ok_or_else(|| Error::InvalidInput(format!("task {task} needs --{flag}")))
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let loaded = load_any(&a.checkpoint)?;
    let report = match a.task.as_str() {
        "reconstruction" => {
            let path = require(&a.edges, "edges", "reconstruction")?;
            let (emb, vocab, cfg) = word_view(&loaded)?;
            let edge_list = corpus::load_edge_list(path)?;
            let mut edges = Vec::with_capacity(edge_list.edge_count());
            for (u, v) in edge_list.edges() {
                let pu = vocab
                    .id(edge_list.node_name(*u))
                    .ok_or_else(|| Error::OutOfVocab(edge_list.node_name(*u).to_string()))?;
                let pv = vocab
                    .id(edge_list.node_name(*v))
                    .ok_or_else(|| Error::OutOfVocab(edge_list.node_name(*v).to_string()))?;
                edges.push((pu, pv));
            }
            let metric = match &loaded {
                Loaded::Graph(g) => g.config.metric,
                Loaded::Sent(m) => m.cfg.metric,
            };
            let r = eval::reconstruction(&emb, &edges, metric)?;
            let mut rep = EvalReport::new("reconstruction")
                .metric("mean_rank", r.mean_rank)
                .metric("map", r.map)
                .count("pairs", r.pairs as u64)
                .count("nodes", emb.len() as u64)
                .dataset("edges", &path.display().to_string())
                .note("mean_rank pools every (parent, child) rank; candidates exclude the parent and its other children");
            rep.config = cfg;
            rep
        }
        "wordsim" => {
            let path = require(&a.pairs, "pairs", "wordsim")?;
            let (emb, vocab, cfg) = word_view(&loaded)?;
            let pairs = eval::load_score_pairs(path)?;
            let r = eval::wordsim_eval(&emb, vocab, &pairs)?;
            let mut rep = EvalReport::new("wordsim")
                .metric("rho", r.rho)
                .count("used", r.used as u64)
                .count("skipped_oov", r.skipped_oov as u64)
                .dataset("pairs", &path.display().to_string())
                .note("score is negative cosine distance between realized points");
            rep.config = cfg;
            rep
        }
        "hyperlex" => {
            let path = require(&a.pairs, "pairs", "hyperlex")?;
            let (emb, vocab, cfg) = word_view(&loaded)?;
            let pairs = eval::load_score_pairs(path)?;
            let r = eval::hyperlex_eval(&emb, vocab, &pairs, a.alpha)?;
            let mut rep = EvalReport::new("hyperlex")
                .metric("rho", r.rho)
                .metric("alpha", a.alpha)
                .count("used", r.used as u64)
                .count("skipped_oov", r.skipped_oov as u64)
                .dataset("pairs", &path.display().to_string())
                .note("is-a score: -(1 + alpha(|y| - |x|)) d(x, y)");
            rep.config = cfg;
            rep
        }
        "norm-freq" => {
            let (emb, vocab, cfg) = word_view(&loaded)?;
            let rho = eval::norm_freq_corr(&emb, vocab.freqs())?;
            let mut rep = EvalReport::new("norm-freq")
                .metric("rho", rho)
                .count("types", vocab.len() as u64)
                .note("Spearman between inverse frequency and hyperbolic norm 2 atanh(|x|)");
            rep.config = cfg;
            rep
        }
        "tree-height" => {
            let path = require(&a.trees, "trees", "tree-height")?;
            let model = match &loaded {
                Loaded::Sent(m) => m,
                Loaded::Graph(_) => {
                    return Err(Error::InvalidInput(
                        "task tree-height needs a sentence checkpoint (it embeds spans)".into(),
                    ))
                }
            };
            let trees = crate::trees::parse_bracketed(&read_to_string(path)?)?;
            let r = eval::tree_height_corr(&trees, |span| {
                let tokens: Vec<String> = span.iter().map(|s| s.to_string()).collect();
                Ok(model.encode(&tokens)?.coords().to_vec())
            })?;
            let mut rep = EvalReport::new("tree-height")
                .metric("rho", r.rho)
                .count("n_nodes", r.nodes as u64)
                .dataset("trees", &path.display().to_string())
                .note("height_convention: leaves at height 0, node height = 1 + max(child heights)");
            rep.config = serde_json::to_value(&model.cfg)?;
            rep
        }
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown task {other:?}; expected reconstruction, wordsim, hyperlex, norm-freq or tree-height"
            )))
        }
    };
    let json = report.to_json();
    match &a.out {
        Some(path) => fs::write(path, format!("{json}\n"))?,
        None => println!("{json}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// neighbors

#[derive(Args)]
struct NeighborsArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Vocabulary item to query.
    #[arg(long)]
    query: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// "cosine" (direction only; the ball metric is conformal) or "hyperbolic".
    #[arg(long, default_value = "cosine")]
    metric: String,
}

fn cmd_neighbors(a: NeighborsArgs) -> Result<()> {
    let loaded = load_any(&a.checkpoint)?;
    let (emb, vocab, _) = word_view(&loaded)?;
    let metric = NeighborMetric::from_str(&a.metric)?;
    let id = vocab
        .id(&a.query)
        .ok_or_else(|| Error::OutOfVocab(a.query.clone()))?;
    let out = std::io::stdout();
    let mut out = out.lock();
    for (nid, score) in eval::nearest_neighbors(&emb, id, a.k, metric)? {
        writeln!(out, "{}\t{}", vocab.token(nid), score)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// export

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// TSV destination (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_export(a: ExportArgs) -> Result<()> {
    let loaded = load_any(&a.checkpoint)?;
    let (emb, vocab, _) = word_view(&loaded)?;
    match &a.out {
        Some(path) => {
            let mut f = std::io::BufWriter::new(fs::File::create(path)?);
            checkpoint::export_tsv(&mut f, vocab, &emb)?;
        }
        None => {
            let out = std::io::stdout();
            let mut out = out.lock();
            checkpoint::export_tsv(&mut out, vocab, &emb)?;
        }
    }
    Ok(())
}
