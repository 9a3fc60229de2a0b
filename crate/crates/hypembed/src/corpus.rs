//! Corpus plumbing: tokenization, vocabularies, co-occurrence graphs, edge
//! lists, sentence files, and the (prev, mid, next) sentence triples the
//! sentence encoder trains on.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Whitespace tokenization, optionally preceded by text8-style
/// normalization (lowercase everything, map every character outside a-z to a
/// space). Tokenizing the space-joined output again is a fixed point.
pub fn tokenize(text: &str, text8_normalize: bool) -> Vec<String> {
    if text8_normalize {
        let mapped: String = text
            .chars()
            .map(|c| {
                let c = c.to_ascii_lowercase();
                if c.is_ascii_lowercase() {
                    c
                } else {
                    ' '
                }
            })
            .collect();
        mapped.split_whitespace().map(str::to_string).collect()
    } else {
        text.split_whitespace().map(str::to_string).collect()
    }
}

/// Token vocabulary with dense ids `[0, len)`, ids ordered most-frequent
/// first with lexicographic tie-breaks. The UNK slot exists only when built
/// with `build_with_unk` (the sentence pipeline); graph and word pipelines
/// drop out-of-vocabulary tokens instead.
#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    freqs: Vec<u64>,
    index: HashMap<String, u32>,
    unk: Option<u32>,
}

pub const UNK_TOKEN: &str = "<unk>";

impl Vocab {
    pub fn build<'a, I>(tokens: I, max_types: Option<usize>, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        Self::build_inner(tokens, max_types, min_count, false)
    }

    /// Like `build`, but appends an UNK entry absorbing the total count of
    /// every dropped token (with a floor of 1 so frequencies stay positive).
    pub fn build_with_unk<'a, I>(tokens: I, max_types: Option<usize>, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        Self::build_inner(tokens, max_types, min_count, true)
    }

    fn build_inner<'a, I>(
        tokens: I,
        max_types: Option<usize>,
        min_count: u64,
        with_unk: bool,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        let mut total: u64 = 0;
        for t in tokens {
            *counts.entry(t).or_insert(0) += 1;
            total += 1;
        }
        if counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut sorted: Vec<(&str, u64)> = counts.into_iter().collect();
        sorted.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let cut = max_types.unwrap_or(usize::MAX).min(sorted.len());
        let mut kept: Vec<(&str, u64)> = sorted
            .into_iter()
            .take(cut)
            .filter(|(_, c)| *c >= min_count)
            .collect();
        if kept.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if with_unk {
            let kept_total: u64 = kept.iter().map(|(_, c)| c).sum();
            kept.push((UNK_TOKEN, (total - kept_total).max(1)));
        }
        let tokens: Vec<String> = kept.iter().map(|(t, _)| t.to_string()).collect();
        let freqs: Vec<u64> = kept.iter().map(|(_, c)| *c).collect();
        let unk = with_unk.then(|| (tokens.len() - 1) as u32);
        Self::from_parts(tokens, freqs, unk)
    }

    /// Rebuild from stored parts (checkpoint loading).
    pub fn from_parts(tokens: Vec<String>, freqs: Vec<u64>, unk: Option<u32>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if tokens.len() != freqs.len() {
            return Err(Error::InvalidInput("token/frequency length mismatch".into()));
        }
        if freqs.iter().any(|f| *f == 0) {
            return Err(Error::InvalidInput("vocab frequencies must be positive".into()));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::InvalidInput(format!("duplicate vocab token {t:?}")));
            }
        }
        Ok(Self {
            tokens,
            freqs,
            index,
            unk,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// Id of `token`, falling back to UNK. Only valid on vocabularies built
    /// with an UNK slot.
    pub fn id_or_unk(&self, token: &str) -> u32 {
        self.id(token)
            .or(self.unk)
            .expect("vocab has no UNK slot; use id()")
    }

    pub fn unk_id(&self) -> Option<u32> {
        self.unk
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn freq(&self, id: u32) -> u64 {
        self.freqs[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn freqs(&self) -> &[u64] {
        &self.freqs
    }

    /// Stable identity of the id mapping (order-sensitive SHA-256 over the
    /// token list); checkpoints store it to detect dataset mismatches.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        let out = h.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone)]
pub struct CoocConfig {
    /// Max distance between paired positions (after stopword removal).
    pub window: usize,
    /// Co-occurrence counts f enter the sampler as f^downsample.
    pub downsample: f64,
    pub max_types: Option<usize>,
    pub min_count: u64,
}

impl Default for CoocConfig {
    fn default() -> Self {
        Self {
            window: 5,
            downsample: 0.25,
            max_types: None,
            min_count: 1,
        }
    }
}

/// Weighted co-occurrence graph over word types: unordered pairs, no
/// self-loops, weights strictly positive, pair list sorted by id.
#[derive(Debug, Clone)]
pub struct CoocGraph {
    pub vocab: Vocab,
    pairs: Vec<(u32, u32)>,
    weights: Vec<f64>,
}

impl CoocGraph {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Build the co-occurrence graph of a token stream. Stopwords are removed
/// before windowing, so words separated only by stopwords count as close;
/// out-of-vocabulary tokens (cut by max_types/min_count) are removed the
/// same way.
pub fn build_cooc(
    tokens: &[String],
    cfg: &CoocConfig,
    stopwords: &HashSet<String>,
) -> Result<CoocGraph> {
    if cfg.window == 0 {
        return Err(Error::Config("window must be >= 1".into()));
    }
    if !(cfg.downsample > 0.0) || cfg.downsample > 1.0 {
        return Err(Error::Config(format!(
            "downsample exponent must be in (0, 1], got {}",
            cfg.downsample
        )));
    }
    let filtered: Vec<&str> = tokens
        .iter()
        .map(String::as_str)
        .filter(|t| !stopwords.contains(*t))
        .collect();
    if filtered.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let vocab = Vocab::build(filtered.iter().copied(), cfg.max_types, cfg.min_count)?;
    let ids: Vec<u32> = filtered.iter().filter_map(|t| vocab.id(t)).collect();
    let mut counts: HashMap<(u32, u32), u64> = HashMap::new();
    for i in 0..ids.len() {
        let hi = (i + cfg.window).min(ids.len() - 1);
        for j in i + 1..=hi {
            let (u, v) = (ids[i], ids[j]);
            if u == v {
                continue;
            }
            let key = (u.min(v), u.max(v));
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut pairs: Vec<((u32, u32), u64)> = counts.into_iter().collect();
    pairs.sort_unstable_by_key(|(k, _)| *k);
    let weights = pairs
        .iter()
        .map(|(_, f)| (*f as f64).powf(cfg.downsample))
        .collect();
    Ok(CoocGraph {
        vocab,
        pairs: pairs.into_iter().map(|(k, _)| k).collect(),
        weights,
    })
}

/// Directed (parent, child) edges over string-named nodes. Node ids are
/// assigned in first-seen order; duplicate edges are kept (a multiset), and
/// self-loops are rejected at parse time.
#[derive(Debug, Clone)]
pub struct EdgeList {
    nodes: Vec<String>,
    index: HashMap<String, u32>,
    edges: Vec<(u32, u32)>,
}

impl EdgeList {
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut el = EdgeList {
            nodes: Vec::new(),
            index: HashMap::new(),
            edges: Vec::new(),
        };
        for (p, c) in pairs {
            el.push_edge(p.as_ref(), c.as_ref())
                .map_err(|msg| Error::InvalidInput(msg))?;
        }
        if el.edges.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(el)
    }

    fn push_edge(&mut self, parent: &str, child: &str) -> std::result::Result<(), String> {
        if parent.is_empty() || child.is_empty() {
            return Err("empty node name".into());
        }
        if parent == child {
            return Err(format!("self-loop on {parent:?}"));
        }
        let p = self.intern(parent);
        let c = self.intern(child);
        self.edges.push((p, c));
        Ok(())
    }

    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn node_id(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn node_name(&self, id: u32) -> &str {
        &self.nodes[id as usize]
    }

    /// Occurrences of each node across all edges (a positive pseudo-count
    /// used as the frequency column in exported vocabularies).
    pub fn node_degrees(&self) -> Vec<u64> {
        let mut deg = vec![0u64; self.nodes.len()];
        for (p, c) in &self.edges {
            deg[*p as usize] += 1;
            deg[*c as usize] += 1;
        }
        deg
    }
}

/// Read a `parent<TAB>child` (or `parent,child`) file, one edge per line.
/// Blank lines are skipped; anything else malformed names its line number.
pub fn load_edge_list(path: &Path) -> Result<EdgeList> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    read_edge_list(&path.display().to_string(), f)
}

pub fn read_edge_list<R: Read>(path_label: &str, reader: R) -> Result<EdgeList> {
    let mut el = EdgeList {
        nodes: Vec::new(),
        index: HashMap::new(),
        edges: Vec::new(),
    };
    for (lineno, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 2 {
            parts = line.split(',').collect();
        }
        if parts.len() != 2 {
            return Err(Error::Parse {
                path: path_label.to_string(),
                line: lineno + 1,
                msg: format!("expected two tab- or comma-separated fields, got {:?}", line),
            });
        }
        el.push_edge(parts[0].trim(), parts[1].trim())
            .map_err(|msg| Error::Parse {
                path: path_label.to_string(),
                line: lineno + 1,
                msg,
            })?;
    }
    if el.edges.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(el)
}

/// One tokenized sentence per non-blank line.
pub fn load_sentences(path: &Path, text8_normalize: bool) -> Result<Vec<Vec<String>>> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for line in BufReader::new(f).lines() {
        let toks = tokenize(&line?, text8_normalize);
        if !toks.is_empty() {
            out.push(toks);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(out)
}

/// A consecutive-sentence training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub prev: Vec<String>,
    pub mid: Vec<String>,
    pub next: Vec<String>,
}

/// All (s[i-1], s[i], s[i+1]) triples, in corpus order. With `augment`, one
/// extra triple per real one is carved out of the flattened token stream:
/// three back-to-back spans whose lengths are drawn from the empirical
/// sentence-length distribution, at a uniform start offset.
pub fn extract_triples(
    sentences: &[Vec<String>],
    augment: bool,
    seed: u64,
) -> Result<Vec<Triple>> {
    if sentences.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 sentences for triples, got {}",
            sentences.len()
        )));
    }
    if sentences.iter().any(|s| s.is_empty()) {
        return Err(Error::InvalidInput("empty sentence in corpus".into()));
    }
    let mut triples: Vec<Triple> = (1..sentences.len() - 1)
        .map(|i| Triple {
            prev: sentences[i - 1].clone(),
            mid: sentences[i].clone(),
            next: sentences[i + 1].clone(),
        })
        .collect();
    if augment {
        use rand::SeedableRng;
        let mut rng = crate::SeededRng::seed_from_u64(seed);
        let stream: Vec<&String> = sentences.iter().flatten().collect();
        let lengths: Vec<usize> = sentences.iter().map(Vec::len).collect();
        let n_base = triples.len();
        for _ in 0..n_base {
            let mut picked = None;
            for _ in 0..20 {
                let l1 = lengths[rng.random_range(0..lengths.len())];
                let l2 = lengths[rng.random_range(0..lengths.len())];
                let l3 = lengths[rng.random_range(0..lengths.len())];
                if l1 + l2 + l3 <= stream.len() {
                    picked = Some((l1, l2, l3));
                    break;
                }
            }
            let Some((l1, l2, l3)) = picked else { continue };
            let start = rng.random_range(0..=stream.len() - (l1 + l2 + l3));
            let take = |a: usize, b: usize| stream[a..b].iter().map(|s| (*s).clone()).collect();
            triples.push(Triple {
                prev: take(start, start + l1),
                mid: take(start + l1, start + l1 + l2),
                next: take(start + l1 + l2, start + l1 + l2 + l3),
            });
        }
    }
    Ok(triples)
}

/// The usual English function words, lowercased.
pub fn default_stopwords() -> HashSet<String> {
    DEFAULT_STOPWORDS
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

pub fn load_stopwords(path: &Path) -> Result<HashSet<String>> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    let mut out = HashSet::new();
    for line in BufReader::new(f).lines() {
        let line = line?;
        let w = line.trim();
        if !w.is_empty() {
            out.insert(w.to_string());
        }
    }
    Ok(out)
}

const DEFAULT_STOPWORDS: &str = "
a about above after again against all am an and any are aren as at be because
been before being below between both but by can cannot could couldn did didn
do does doesn doing don down during each few for from further had hadn has
hasn have haven having he her here hers herself him himself his how i if in
into is isn it its itself just me more most mustn my myself no nor not now of
off on once only or other our ours ourselves out over own s same shan she
should shouldn so some such t than that the their theirs them themselves then
there these they this those through to too under until up very was wasn we
were weren what when where which while who whom why will with won would
wouldn you your yours yourself yourselves
";
