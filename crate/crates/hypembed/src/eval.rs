//! Evaluation protocol: reconstruction mean rank and MAP, Spearman
//! correlations, nearest neighbors, HyperLex is-a scoring, word similarity,
//! norm/frequency and norm/parse-height correlations.
//!
//! Everything here is read-only over a frozen set of realized ball points.
//! Rank ties are always broken by id so results are deterministic and
//! brute-force checkable.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::ball::{cosine_distance, BallPoint, Metric, BALL_EPS};
use crate::corpus::Vocab;
use crate::error::{Error, Result};
use crate::trees::ParseNode;

/// A frozen, dense set of embeddings (row id = vocab/node id).
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingSet {
    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim < 2 || data.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "flat embedding data of length {} does not tile dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, id: u32) -> &[f64] {
        let i = id as usize * self.dim;
        &self.data[i..i + self.dim]
    }

    /// Distance of point `id` from the origin, `2 atanh(||x||)`.
    pub fn hyperbolic_norm(&self, id: u32) -> f64 {
        let n = crate::ball::norm(self.point(id)).min(1.0 - BALL_EPS);
        2.0 * n.atanh()
    }
}

/// Average-rank (fractional) ranks, 1-based: ties share the mean of the
/// positions they occupy.
fn fractional_ranks(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in correlation input".into()));
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    Ok(ranks)
}

/// Spearman's rho with fractional tie handling: Pearson correlation of the
/// two rank vectors. Errors when either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput("correlation inputs differ in length".into()));
    }
    if xs.len() < 2 {
        return Err(Error::InvalidInput("correlation needs at least 2 points".into()));
    }
    let rx = fractional_ranks(xs)?;
    let ry = fractional_ranks(ys)?;
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "an input to spearman is constant".into(),
        ));
    }
    Ok(cov / (vx * vy).sqrt())
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ReconstructionReport {
    pub mean_rank: f64,
    pub map: f64,
    /// Number of (parent, child) pairs pooled into mean_rank.
    pub pairs: usize,
}

/// Reconstruction protocol: for every directed edge (u, v), rank v by
/// distance from u among all nodes except u itself and u's other true
/// children. `mean_rank` pools every (parent, child) rank; `map` averages
/// per-parent average precision. Distance ties are broken by id.
pub fn reconstruction(
    emb: &EmbeddingSet,
    edges: &[(u32, u32)],
    metric: Metric,
) -> Result<ReconstructionReport> {
    let n = emb.len() as u32;
    let mut children: HashMap<u32, HashSet<u32>> = HashMap::new();
    for (p, c) in edges {
        if *p >= n || *c >= n {
            return Err(Error::InvalidInput(format!(
                "edge ({p}, {c}) references a node without an embedding (have {n})"
            )));
        }
        children.entry(*p).or_default().insert(*c);
    }
    if children.is_empty() {
        return Err(Error::InvalidInput("no edges to reconstruct".into()));
    }
    let mut parents: Vec<u32> = children.keys().copied().collect();
    parents.sort_unstable();

    let mut rank_sum = 0.0;
    let mut rank_count = 0usize;
    let mut ap_sum = 0.0;
    for u in &parents {
        let cs = &children[u];
        let mut order: Vec<u32> = (0..n).filter(|i| i != u).collect();
        let pu = emb.point(*u);
        let dists: Vec<f64> = order.iter().map(|&i| metric.dist(pu, emb.point(i))).collect();
        let mut idx: Vec<usize> = (0..order.len()).collect();
        idx.sort_by(|&a, &b| {
            dists[a]
                .partial_cmp(&dists[b])
                .unwrap()
                .then(order[a].cmp(&order[b]))
        });
        order = idx.iter().map(|&i| order[i]).collect();

        // Walk once: each child's rank counts only non-children before it.
        let mut non_children_seen = 0usize;
        let mut child_ranks = Vec::with_capacity(cs.len());
        for v in &order {
            if cs.contains(v) {
                child_ranks.push(non_children_seen + 1);
            } else {
                non_children_seen += 1;
            }
        }
        debug_assert_eq!(child_ranks.len(), cs.len());
        // child_ranks is ascending by construction; AP over the merged list.
        let mut ap = 0.0;
        for (i, r) in child_ranks.iter().enumerate() {
            ap += (i + 1) as f64 / (r + i) as f64;
            rank_sum += *r as f64;
            rank_count += 1;
        }
        ap_sum += ap / cs.len() as f64;
    }
    Ok(ReconstructionReport {
        mean_rank: rank_sum / rank_count as f64,
        map: ap_sum / parents.len() as f64,
        pairs: rank_count,
    })
}

/// Metric for neighbor queries. Hyperbolic neighbors of most words are
/// dominated by norm; cosine compares directions only (the ball metric is
/// conformal to the Euclidean one, so angles agree).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborMetric {
    Cosine,
    Hyperbolic,
}

impl std::str::FromStr for NeighborMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(NeighborMetric::Cosine),
            "hyperbolic" => Ok(NeighborMetric::Hyperbolic),
            other => Err(Error::Config(format!(
                "unknown neighbor metric {other:?}, expected cosine or hyperbolic"
            ))),
        }
    }
}

/// The k nearest neighbors of `query` (query excluded), ascending by the
/// chosen distance, ties broken by id.
pub fn nearest_neighbors(
    emb: &EmbeddingSet,
    query: u32,
    k: usize,
    metric: NeighborMetric,
) -> Result<Vec<(u32, f64)>> {
    let n = emb.len();
    if query as usize >= n {
        return Err(Error::InvalidInput(format!("query id {query} out of range")));
    }
    if k >= n {
        return Err(Error::InvalidInput(format!(
            "k = {k} must be smaller than the vocabulary ({n})"
        )));
    }
    let q = emb.point(query);
    let mut scored: Vec<(u32, f64)> = Vec::with_capacity(n - 1);
    for i in 0..n as u32 {
        if i == query {
            continue;
        }
        let d = match metric {
            NeighborMetric::Cosine => cosine_distance(q, emb.point(i))?,
            NeighborMetric::Hyperbolic => Metric::Hyperbolic.dist(q, emb.point(i)),
        };
        scored.push((i, d));
    }
    scored.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

/// Is-a score: `-(1 + alpha (||y|| - ||x||)) d(x, y)`. Specific terms sit
/// near the boundary, so a higher-norm x looks like the hyponym of y.
pub fn hyperlex_score(x: &BallPoint, y: &BallPoint, alpha: f64) -> f64 {
    let d = crate::ball::poincare_distance(x, y);
    -(1.0 + alpha * (y.norm() - x.norm())) * d
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct PairEvalReport {
    pub rho: f64,
    pub used: usize,
    pub skipped_oov: usize,
}

/// Spearman between gold scores and the model's hyperlex scores over a
/// (w1, w2, score) list. Pairs with an out-of-vocabulary side are skipped
/// and counted, never substituted.
pub fn hyperlex_eval(
    emb: &EmbeddingSet,
    vocab: &Vocab,
    pairs: &[(String, String, f64)],
    alpha: f64,
) -> Result<PairEvalReport> {
    score_pairs(emb, vocab, pairs, |x, y| hyperlex_score(x, y, alpha))
}

/// Spearman between gold similarity scores and negative cosine distances.
pub fn wordsim_eval(
    emb: &EmbeddingSet,
    vocab: &Vocab,
    pairs: &[(String, String, f64)],
) -> Result<PairEvalReport> {
    let mut err = None;
    let report = score_pairs(emb, vocab, pairs, |x, y| {
        match cosine_distance(x.coords(), y.coords()) {
            Ok(d) => -d,
            Err(e) => {
                err = Some(e);
                0.0
            }
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

fn score_pairs(
    emb: &EmbeddingSet,
    vocab: &Vocab,
    pairs: &[(String, String, f64)],
    mut score: impl FnMut(&BallPoint, &BallPoint) -> f64,
) -> Result<PairEvalReport> {
    let mut gold = Vec::new();
    let mut model = Vec::new();
    let mut skipped = 0usize;
    for (w1, w2, g) in pairs {
        match (vocab.id(w1), vocab.id(w2)) {
            (Some(a), Some(b)) => {
                let x = BallPoint::new(emb.point(a).to_vec())?;
                let y = BallPoint::new(emb.point(b).to_vec())?;
                gold.push(*g);
                model.push(score(&x, &y));
            }
            _ => skipped += 1,
        }
    }
    if gold.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "only {} in-vocabulary pairs, need at least 2",
            gold.len()
        )));
    }
    Ok(PairEvalReport {
        rho: spearman(&gold, &model)?,
        used: gold.len(),
        skipped_oov: skipped,
    })
}

/// Spearman between inverse frequency (1/f) and hyperbolic norm: frequent,
/// general words should sit near the origin.
pub fn norm_freq_corr(emb: &EmbeddingSet, freqs: &[u64]) -> Result<f64> {
    if freqs.len() != emb.len() {
        return Err(Error::InvalidInput(format!(
            "{} frequencies for {} embeddings",
            freqs.len(),
            emb.len()
        )));
    }
    let inv_f: Vec<f64> = freqs.iter().map(|f| 1.0 / (*f as f64)).collect();
    let norms: Vec<f64> = (0..emb.len() as u32).map(|i| emb.hyperbolic_norm(i)).collect();
    spearman(&inv_f, &norms)
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct TreeHeightReport {
    pub rho: f64,
    pub nodes: usize,
}

/// Embed every node's span across all trees and correlate embedding norm
/// with node height (leaves at height 0).
pub fn tree_height_corr<F>(trees: &[ParseNode], mut embed_span: F) -> Result<TreeHeightReport>
where
    F: FnMut(&[&str]) -> Result<Vec<f64>>,
{
    let mut heights = Vec::new();
    let mut norms = Vec::new();
    for tree in trees {
        for node in tree.nodes() {
            let coords = embed_span(&node.span())?;
            let n = crate::ball::norm(&coords).min(1.0 - BALL_EPS);
            norms.push(2.0 * n.atanh());
            heights.push(node.height() as f64);
        }
    }
    Ok(TreeHeightReport {
        rho: spearman(&norms, &heights)?,
        nodes: heights.len(),
    })
}

/// Read a `w1<TAB>w2<TAB>score` file (comma or whitespace separation also
/// accepted). The first line may be a header: it is skipped if its score
/// field does not parse.
pub fn load_score_pairs(path: &Path) -> Result<Vec<(String, String, f64)>> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    read_score_pairs(&path.display().to_string(), f)
}

pub fn read_score_pairs<R: Read>(path_label: &str, reader: R) -> Result<Vec<(String, String, f64)>> {
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts: Vec<&str> = line.split('\t').map(str::trim).collect();
        if parts.len() != 3 {
            parts = line.split(',').map(str::trim).collect();
        }
        if parts.len() != 3 {
            parts = line.split_whitespace().collect();
        }
        let parsed = if parts.len() == 3 {
            parts[2].parse::<f64>().ok().map(|s| (parts[0], parts[1], s))
        } else {
            None
        };
        match parsed {
            Some((w1, w2, s)) => out.push((w1.to_string(), w2.to_string(), s)),
            None if lineno == 0 => continue, // header line
            None => {
                return Err(Error::Parse {
                    path: path_label.to_string(),
                    line: lineno + 1,
                    msg: format!("expected 'w1<TAB>w2<TAB>score', got {line:?}"),
                })
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(out)
}

/// Machine-readable evaluation output: metric values plus enough context
/// (config, datasets, conventions) to reproduce them.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub metrics: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, u64>,
    pub datasets: BTreeMap<String, String>,
    pub notes: Vec<String>,
    pub config: serde_json::Value,
}

impl EvalReport {
    pub fn new(task: &str) -> Self {
        Self {
            task: task.to_string(),
            metrics: BTreeMap::new(),
            counts: BTreeMap::new(),
            datasets: BTreeMap::new(),
            notes: Vec::new(),
            config: serde_json::Value::Null,
        }
    }

    pub fn metric(mut self, name: &str, value: f64) -> Self {
        self.metrics.insert(name.to_string(), value);
        self
    }

    pub fn count(mut self, name: &str, value: u64) -> Self {
        self.counts.insert(name.to_string(), value);
        self
    }

    pub fn dataset(mut self, name: &str, id: &str) -> Self {
        self.datasets.insert(name.to_string(), id.to_string());
        self
    }

    pub fn note(mut self, note: &str) -> Self {
        self.notes.push(note.to_string());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(points: &[&[f64]]) -> EmbeddingSet {
        let dim = points[0].len();
        EmbeddingSet::from_flat(dim, points.iter().flat_map(|p| p.iter().copied()).collect())
            .unwrap()
    }

    #[test]
    fn spearman_monotone_and_reversed() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&xs, &[10.0, 20.0, 30.0, 40.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&xs, &[4.0, 3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_frozen_values() {
        // [1,2,3,4] vs [1,2,4,3]: sum of squared rank diffs = 2, rho = 0.8.
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 4.0, 3.0]).unwrap();
        assert!((r - 0.8).abs() < 1e-12);
        // Tie case frozen against an independent fractional-rank computation.
        let r = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((r - 0.9486832980505138).abs() < 1e-12);
    }

    #[test]
    fn spearman_constant_input_is_undefined() {
        match spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]) {
            Err(Error::UndefinedCorrelation(_)) => {}
            other => panic!("expected UndefinedCorrelation, got {other:?}"),
        }
    }

    #[test]
    fn reconstruction_single_child() {
        let emb = set(&[&[0.0, 0.0], &[0.1, 0.0], &[0.0, 0.8]]);
        let r = reconstruction(&emb, &[(0, 1)], Metric::Hyperbolic).unwrap();
        assert_eq!(r.mean_rank, 1.0);
        assert_eq!(r.map, 1.0);
        assert_eq!(r.pairs, 1);
    }

    #[test]
    fn reconstruction_excludes_other_children() {
        // Both children beat the lone non-child, so both rank 1 even though
        // c2 is second-nearest overall.
        let emb = set(&[&[0.0, 0.0], &[0.1, 0.0], &[0.2, 0.0], &[0.0, 0.9]]);
        let r = reconstruction(&emb, &[(0, 1), (0, 2)], Metric::Hyperbolic).unwrap();
        assert_eq!(r.mean_rank, 1.0);
        assert_eq!(r.map, 1.0);
    }

    #[test]
    fn reconstruction_counts_interlopers() {
        // Non-child 3 sits between the two children: ranks 1 and 2,
        // AP = (1/1 + 2/3) / 2.
        let emb = set(&[&[0.0, 0.0], &[0.1, 0.0], &[0.3, 0.0], &[0.2, 0.0]]);
        let r = reconstruction(&emb, &[(0, 1), (0, 2)], Metric::Hyperbolic).unwrap();
        assert!((r.mean_rank - 1.5).abs() < 1e-12);
        assert!((r.map - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_missing_embedding_errors() {
        let emb = set(&[&[0.0, 0.0], &[0.1, 0.0]]);
        assert!(reconstruction(&emb, &[(0, 5)], Metric::Hyperbolic).is_err());
    }

    #[test]
    fn neighbors_match_exhaustive_sort() {
        let emb = set(&[&[0.5, 0.0], &[0.4, 0.1], &[-0.5, 0.0], &[0.0, 0.5]]);
        let nn = nearest_neighbors(&emb, 0, 3, NeighborMetric::Hyperbolic).unwrap();
        let ids: Vec<u32> = nn.iter().map(|(i, _)| *i).collect();
        assert_eq!(ids, vec![1, 3, 2]);
        assert!(nn[0].1 <= nn[1].1 && nn[1].1 <= nn[2].1);
    }

    #[test]
    fn neighbors_break_ties_by_id() {
        let emb = set(&[&[0.0, 0.0], &[0.0, 0.3], &[0.3, 0.0], &[0.9, 0.0]]);
        let nn = nearest_neighbors(&emb, 0, 2, NeighborMetric::Hyperbolic).unwrap();
        assert_eq!(nn[0].0, 1);
        assert_eq!(nn[1].0, 2);
        assert_eq!(nn[0].1.to_bits(), nn[1].1.to_bits());
    }

    #[test]
    fn neighbors_reject_oversized_k() {
        let emb = set(&[&[0.2, 0.0], &[0.1, 0.0]]);
        assert!(nearest_neighbors(&emb, 0, 2, NeighborMetric::Cosine).is_err());
        assert!(nearest_neighbors(&emb, 0, 1, NeighborMetric::Cosine).is_ok());
    }

    #[test]
    fn cosine_neighbors_ignore_norms() {
        let base = set(&[&[0.5, 0.0], &[0.3, 0.3], &[0.0, 0.4]]);
        let scaled = set(&[&[0.5, 0.0], &[0.03, 0.03], &[0.0, 0.9]]);
        let a = nearest_neighbors(&base, 0, 2, NeighborMetric::Cosine).unwrap();
        let b = nearest_neighbors(&scaled, 0, 2, NeighborMetric::Cosine).unwrap();
        let ids = |v: &[(u32, f64)]| v.iter().map(|(i, _)| *i).collect::<Vec<_>>();
        assert_eq!(ids(&a), ids(&b));
        for (x, y) in a.iter().zip(&b) {
            assert!((x.1 - y.1).abs() < 1e-12);
        }
    }

    #[test]
    fn hyperlex_frozen_value() {
        let x = BallPoint::new(vec![0.6, 0.0]).unwrap();
        let y = BallPoint::new(vec![0.2, 0.0]).unwrap();
        let s = hyperlex_score(&x, &y, 1.0);
        assert!((s - (-0.5884975518070358)).abs() < 1e-12);
    }

    #[test]
    fn hyperlex_norm_term_is_antisymmetric() {
        let x = BallPoint::new(vec![0.5, 0.1]).unwrap();
        let y = BallPoint::new(vec![-0.2, 0.3]).unwrap();
        let d = crate::ball::poincare_distance(&x, &y);
        let s_xy = hyperlex_score(&x, &y, 7.0);
        let s_yx = hyperlex_score(&y, &x, 7.0);
        assert!((s_xy + s_yx - (-2.0 * d)).abs() < 1e-12);
    }

    #[test]
    fn norm_freq_correlation_on_aligned_data() {
        // Frequent words near the origin: 1/f and norm perfectly aligned.
        let emb = set(&[&[0.1, 0.0], &[0.3, 0.0], &[0.6, 0.0], &[0.9, 0.0]]);
        let rho = norm_freq_corr(&emb, &[1000, 100, 10, 1]).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tree_height_correlates_with_norm() {
        let trees = crate::trees::parse_bracketed("(S (NP (DT a) (NN b)) (VP c))").unwrap();
        // Give each span a norm that grows with its length (a proxy that is
        // monotone in height for this tree).
        let report = tree_height_corr(&trees, |span| {
            let r = 0.1 * span.len() as f64;
            Ok(vec![r, 0.0])
        })
        .unwrap();
        // S, NP, VP, DT, NN and three terminals.
        assert_eq!(report.nodes, 8);
        assert!(report.rho > 0.7);
    }

    #[test]
    fn score_pairs_reader_tolerates_header_and_skips_oov() {
        let data = "word1\tword2\tscore\napple\tbanana\t3.5\napple\tzzz\t1.0\nbanana\tcherry\t2.0\ncherry\tapple\t0.5\n";
        let pairs = read_score_pairs("t", data.as_bytes()).unwrap();
        assert_eq!(pairs.len(), 4);
        let vocab = Vocab::from_parts(
            vec!["apple".into(), "banana".into(), "cherry".into()],
            vec![3, 2, 1],
            None,
        )
        .unwrap();
        let emb = set(&[&[0.1, 0.0], &[0.0, 0.2], &[-0.3, 0.0]]);
        let r = wordsim_eval(&emb, &vocab, &pairs).unwrap();
        assert_eq!(r.used, 3);
        assert_eq!(r.skipped_oov, 1);
        match read_score_pairs("t", "a\tb\t1.0\nbroken\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected Parse, got {other:?}"),
        }
    }

    #[test]
    fn eval_report_serializes_deterministically() {
        let r = EvalReport::new("reconstruction")
            .metric("map", 0.9)
            .metric("mean_rank", 1.5)
            .count("pairs", 10)
            .note("ties broken by id");
        let json = r.to_json();
        let again: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(again.to_json(), json);
        assert!(json.contains("\"map\""));
    }

    proptest! {
        #[test]
        fn spearman_is_monotone_invariant(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = crate::SeededRng::seed_from_u64(seed);
            let xs: Vec<f64> = (0..20).map(|_| rng.random_range(-5.0..5.0)).collect();
            let ys: Vec<f64> = (0..20).map(|_| rng.random_range(-5.0..5.0)).collect();
            prop_assume!(spearman(&xs, &ys).is_ok());
            let rho = spearman(&xs, &ys).unwrap();
            // exp is strictly monotone; cube is too.
            let xs2: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
            let ys2: Vec<f64> = ys.iter().map(|y| y.powi(3)).collect();
            let rho2 = spearman(&xs2, &ys2).unwrap();
            prop_assert!((rho - rho2).abs() < 1e-9);
        }
    }
}
