//! Graph embedding: a re-parameterized lookup table trained with Adam on the
//! negative-sampling softmax loss
//!
//! ```text
//! L = -(1/|B|) sum_{(u,v) in B} log( exp(-d(u,v)) / sum_{v' in N(u) + {v}} exp(-d(u,v')) )
//! ```
//!
//! where negatives are uniform draws over V minus u, rejection-sampled
//! against u's true neighbors. Works over explicit edge lists (taxonomies)
//! and weighted co-occurrence graphs (words); one co-occurrence epoch is
//! `sum(ceil(w))` weighted draws with replacement.
//!
//! Training is sequential and bit-deterministic for a fixed seed: batch rows
//! are accumulated and updated in sorted-id order.

use std::collections::HashSet;

use rand::distr::Distribution;
use rand::{Rng, SeedableRng};

use crate::ball::{dist_and_grad_into, reparam, reparam_grad, reparam_train, Metric, Realized, DIR_EPS};
use crate::corpus::{CoocGraph, EdgeList};
use crate::error::{Error, Result};
use crate::eval::EmbeddingSet;
use crate::optim::{clip_by_global_norm, AdamHyper, RowAdam};
use crate::SeededRng;

/// Give up rejecting a negative after this many tries and accept the draw.
pub const NEG_REJECT_CAP: usize = 20;

/// Raw embedding storage: one `(dir_raw[0..d], norm_raw)` row per node.
#[derive(Debug, Clone)]
pub struct ReparamTable {
    ball_dim: usize,
    raw: Vec<f64>,
}

impl ReparamTable {
    /// Directions start tiny and uniform, raw norms start near
    /// `init_norm_value` (realized radius about sigmoid of it) with a small
    /// jitter to break symmetry.
    pub fn init(
        rows: usize,
        ball_dim: usize,
        init_dir_range: f64,
        init_norm_value: f64,
        rng: &mut SeededRng,
    ) -> Self {
        assert!(ball_dim >= 2, "ball dimension must be >= 2");
        let stride = ball_dim + 1;
        let mut raw = Vec::with_capacity(rows * stride);
        for _ in 0..rows {
            for _ in 0..ball_dim {
                raw.push(rng.random_range(-init_dir_range..init_dir_range));
            }
            raw.push(init_norm_value + rng.random_range(-0.1..0.1));
        }
        Self { ball_dim, raw }
    }

    pub fn from_raw(ball_dim: usize, raw: Vec<f64>) -> Result<Self> {
        if ball_dim < 2 || raw.len() % (ball_dim + 1) != 0 {
            return Err(Error::InvalidInput(format!(
                "raw table length {} does not tile rows of dimension {ball_dim}+1",
                raw.len()
            )));
        }
        Ok(Self { ball_dim, raw })
    }

    pub fn rows(&self) -> usize {
        self.raw.len() / self.stride()
    }

    pub fn ball_dim(&self) -> usize {
        self.ball_dim
    }

    pub fn stride(&self) -> usize {
        self.ball_dim + 1
    }

    pub fn raw(&self) -> &[f64] {
        &self.raw
    }

    pub fn raw_mut(&mut self) -> &mut [f64] {
        &mut self.raw
    }

    pub fn raw_row(&self, id: u32) -> &[f64] {
        let s = self.stride();
        &self.raw[id as usize * s..(id as usize + 1) * s]
    }

    /// Realize one row as a ball point (inference mode: degenerate
    /// directions are an error).
    pub fn realize(&self, id: u32) -> Result<Realized> {
        reparam(self.raw_row(id))
    }

    /// Realize the whole table into a frozen embedding matrix.
    pub fn realize_all(&self) -> Result<EmbeddingSet> {
        let mut flat = Vec::with_capacity(self.rows() * self.ball_dim);
        for id in 0..self.rows() as u32 {
            let r = self.realize(id).map_err(|e| match e {
                Error::DegenerateDirection => Error::InvalidInput(format!(
                    "row {id} has a degenerate direction and cannot be realized"
                )),
                other => other,
            })?;
            flat.extend_from_slice(&r.point);
        }
        EmbeddingSet::from_flat(self.ball_dim, flat)
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub negatives: usize,
    pub clip_norm: f64,
    pub metric: Metric,
    pub seed: u64,
    /// Epochs trained at lr/10 before the real run; off by default.
    pub burn_in_epochs: usize,
    /// Run reconstruction every k epochs (0 = never; edge datasets only).
    pub eval_every: usize,
    pub init_dir_range: f64,
    pub init_norm_value: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 20,
            epochs: 50,
            batch_size: 1024,
            lr: 0.005,
            negatives: 10,
            clip_norm: 5.0,
            metric: Metric::Hyperbolic,
            seed: 42,
            burn_in_epochs: 0,
            eval_every: 0,
            init_dir_range: 0.001,
            init_norm_value: -5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::Config("dim must be >= 2".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.negatives == 0 {
            return Err(Error::Config(
                "epochs, batch_size and negatives must all be >= 1".into(),
            ));
        }
        if !(self.lr > 0.0) || !(self.clip_norm > 0.0) {
            return Err(Error::Config("lr and clip_norm must be positive".into()));
        }
        Ok(())
    }
}

/// What the trainer consumes: positives are edges (shuffled passes) or
/// weighted co-occurrence pairs (draws with replacement).
pub enum TrainData {
    Edges(EdgeList),
    Cooc(CoocGraph),
}

impl TrainData {
    pub fn node_count(&self) -> usize {
        match self {
            TrainData::Edges(e) => e.node_count(),
            TrainData::Cooc(g) => g.vocab.len(),
        }
    }

    pub fn node_names(&self) -> Vec<String> {
        match self {
            TrainData::Edges(e) => e.nodes().to_vec(),
            TrainData::Cooc(g) => g.vocab.tokens().to_vec(),
        }
    }
}

/// Per-node true-neighbor sets for negative rejection.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    sets: Vec<HashSet<u32>>,
}

impl NeighborIndex {
    /// Directed: rejects v for anchor u iff (u, v) is an edge.
    pub fn from_edges(n: usize, edges: &[(u32, u32)]) -> Self {
        let mut sets = vec![HashSet::new(); n];
        for (u, v) in edges {
            sets[*u as usize].insert(*v);
        }
        Self { sets }
    }

    /// Symmetric: unordered co-occurrence pairs reject in both directions.
    pub fn from_pairs_symmetric(n: usize, pairs: &[(u32, u32)]) -> Self {
        let mut sets = vec![HashSet::new(); n];
        for (u, v) in pairs {
            sets[*u as usize].insert(*v);
            sets[*v as usize].insert(*u);
        }
        Self { sets }
    }

    pub fn is_neighbor(&self, u: u32, v: u32) -> bool {
        self.sets[u as usize].contains(&v)
    }
}

/// k uniform draws over V minus {u}, rejecting u's true neighbors up to
/// `NEG_REJECT_CAP` times per slot and then accepting whatever comes.
/// Duplicates across slots are allowed.
pub fn sample_negatives(
    u: u32,
    k: usize,
    n_nodes: usize,
    index: &NeighborIndex,
    rng: &mut SeededRng,
) -> Vec<u32> {
    debug_assert!(n_nodes >= 2, "cannot sample negatives from a single node");
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let mut attempts = 0;
        let cand = loop {
            // Uniform over V \ {u} without rejection on u itself.
            let mut c = rng.random_range(0..n_nodes as u32 - 1);
            if c >= u {
                c += 1;
            }
            if attempts >= NEG_REJECT_CAP || !index.is_neighbor(u, c) {
                break c;
            }
            attempts += 1;
        };
        out.push(cand);
    }
    out
}

/// Loss and per-row raw gradients for one batch (rows sorted by id).
pub struct BatchGrads {
    pub loss: f64,
    pub rows: Vec<(u32, Vec<f64>)>,
    /// Pairs whose distance gradient was skipped as degenerate.
    pub degenerate_pairs: usize,
}

/// Mean negative-sampling softmax loss over the batch and its gradient with
/// respect to every touched raw row. `negatives[i]` lists the sampled
/// non-neighbors for `positives[i]`.
pub fn batch_loss(
    table: &ReparamTable,
    positives: &[(u32, u32)],
    negatives: &[Vec<u32>],
    metric: Metric,
) -> Result<BatchGrads> {
    assert_eq!(positives.len(), negatives.len());
    if positives.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let d = table.ball_dim();

    // Sorted unique touched ids; binary search as the id -> local map keeps
    // every later loop deterministic.
    let mut ids: Vec<u32> = Vec::with_capacity(positives.len() * (2 + negatives[0].len()));
    for ((u, v), negs) in positives.iter().zip(negatives) {
        ids.push(*u);
        ids.push(*v);
        ids.extend_from_slice(negs);
    }
    ids.sort_unstable();
    ids.dedup();
    let local = |id: u32| ids.binary_search(&id).expect("touched id") as usize;

    let realized: Vec<Realized> = ids
        .iter()
        .map(|&id| table.realize(id))
        .collect::<Result<_>>()?;
    let mut dtheta = vec![0.0; ids.len() * d];

    let inv_batch = 1.0 / positives.len() as f64;
    let mut loss = 0.0;
    let mut degenerate = 0usize;
    let mut gu = vec![0.0; d];
    let mut gv = vec![0.0; d];
    let mut cand_local = Vec::new();
    let mut scores = Vec::new();

    for ((u, v), negs) in positives.iter().zip(negatives) {
        let lu = local(*u);
        cand_local.clear();
        cand_local.push(local(*v));
        cand_local.extend(negs.iter().map(|n| local(*n)));

        scores.clear();
        for &lc in &cand_local {
            scores.push(-metric.dist(&realized[lu].point, &realized[lc].point));
        }
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = scores.iter().map(|s| (s - max).exp()).sum();
        let lse = max + sum_exp.ln();
        loss += (lse - scores[0]) * inv_batch;

        for (j, &lc) in cand_local.iter().enumerate() {
            let p = (scores[j] - lse).exp();
            let indicator = if j == 0 { 1.0 } else { 0.0 };
            // dL/dd_j for this positive, including the batch mean.
            let coeff = (indicator - p) * inv_batch;
            let (_, degen) = dist_and_grad_into(
                metric,
                &realized[lu].point,
                &realized[lc].point,
                &mut gu,
                &mut gv,
            );
            if degen {
                degenerate += 1;
                continue;
            }
            let bu = lu * d;
            let bc = lc * d;
            for i in 0..d {
                dtheta[bu + i] += coeff * gu[i];
                dtheta[bc + i] += coeff * gv[i];
            }
        }
    }

    let rows = ids
        .iter()
        .enumerate()
        .map(|(l, &id)| {
            let mut g = vec![0.0; d + 1];
            reparam_grad(&realized[l], &dtheta[l * d..(l + 1) * d], &mut g);
            (id, g)
        })
        .collect();

    Ok(BatchGrads {
        loss,
        rows,
        degenerate_pairs: degenerate,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub mean_rank: Option<f64>,
    pub map: Option<f64>,
}

pub struct TrainRun {
    pub table: ReparamTable,
    pub epochs: Vec<EpochStats>,
    pub degenerate_pairs: u64,
    pub dir_reinits: u64,
    pub steps: u64,
}

/// Full training loop: init, epochs of shuffled edges or weighted draws,
/// negative sampling, batch gradients, global-norm clip, sparse Adam.
pub fn train(data: &TrainData, cfg: &TrainConfig) -> Result<TrainRun> {
    cfg.validate()?;
    let n = data.node_count();
    if n < 2 {
        return Err(Error::Config(format!(
            "need at least 2 nodes to sample negatives, got {n}"
        )));
    }
    let mut rng = SeededRng::seed_from_u64(cfg.seed);
    let mut table = ReparamTable::init(n, cfg.dim, cfg.init_dir_range, cfg.init_norm_value, &mut rng);
    let mut adam = RowAdam::new(n, cfg.dim + 1);

    let (index, edges_for_eval): (NeighborIndex, Option<&[(u32, u32)]>) = match data {
        TrainData::Edges(e) => (NeighborIndex::from_edges(n, e.edges()), Some(e.edges())),
        TrainData::Cooc(g) => (NeighborIndex::from_pairs_symmetric(n, g.pairs()), None),
    };

    // Co-occurrence sampling machinery: draws per epoch = sum(ceil(w)).
    let cooc_sampler = match data {
        TrainData::Cooc(g) => {
            let wi = rand::distr::weighted::WeightedIndex::new(g.weights().iter().copied())
                .map_err(|e| Error::Config(format!("bad co-occurrence weights: {e}")))?;
            let draws: f64 = g.weights().iter().map(|w| w.ceil()).sum();
            Some((wi, draws as usize))
        }
        TrainData::Edges(_) => None,
    };

    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut degenerate_pairs = 0u64;
    let mut dir_reinits = 0u64;
    let mut steps = 0u64;
    let mut positives: Vec<(u32, u32)> = Vec::new();

    for epoch in 1..=cfg.epochs + cfg.burn_in_epochs {
        let burn_in = epoch <= cfg.burn_in_epochs;
        let lr = if burn_in { cfg.lr * 0.1 } else { cfg.lr };
        let hyper = AdamHyper::new(lr);

        positives.clear();
        match (data, &cooc_sampler) {
            (TrainData::Edges(e), _) => {
                positives.extend_from_slice(e.edges());
                use rand::seq::SliceRandom;
                positives.shuffle(&mut rng);
            }
            (TrainData::Cooc(g), Some((wi, draws))) => {
                for _ in 0..*draws {
                    let (a, b) = g.pairs()[wi.sample(&mut rng)];
                    // Unordered pair: orient uniformly so both sides anchor.
                    if rng.random_bool(0.5) {
                        positives.push((a, b));
                    } else {
                        positives.push((b, a));
                    }
                }
            }
            _ => unreachable!(),
        }

        let mut loss_sum = 0.0;
        for batch in positives.chunks(cfg.batch_size) {
            let negatives: Vec<Vec<u32>> = batch
                .iter()
                .map(|(u, _)| sample_negatives(*u, cfg.negatives, n, &index, &mut rng))
                .collect();

            // Training-time degenerate directions get re-initialized before
            // the (immutable) batch pass.
            let mut touched: Vec<u32> = Vec::new();
            for ((u, v), negs) in batch.iter().zip(&negatives) {
                touched.push(*u);
                touched.push(*v);
                touched.extend_from_slice(negs);
            }
            touched.sort_unstable();
            touched.dedup();
            let stride = table.stride();
            for &id in &touched {
                let row = &table.raw()[id as usize * stride..id as usize * stride + cfg.dim];
                if crate::ball::norm(row) < DIR_EPS {
                    let full = &mut table.raw_mut()[id as usize * stride..(id as usize + 1) * stride];
                    reparam_train(full, &mut rng);
                    dir_reinits += 1;
                }
            }

            let mut out = batch_loss(&table, batch, &negatives, cfg.metric)?;
            degenerate_pairs += out.degenerate_pairs as u64;
            {
                let mut named: Vec<(&str, &mut [f64])> = out
                    .rows
                    .iter_mut()
                    .map(|(_, g)| ("embedding_table", g.as_mut_slice()))
                    .collect();
                clip_by_global_norm(&mut named, cfg.clip_norm)?;
            }
            adam.step_rows(table.raw_mut(), &out.rows, &hyper);
            loss_sum += out.loss * batch.len() as f64;
            steps += 1;
        }

        let mean_loss = loss_sum / positives.len() as f64;
        let (mut mean_rank, mut map) = (None, None);
        if !burn_in && cfg.eval_every > 0 && (epoch - cfg.burn_in_epochs) % cfg.eval_every == 0 {
            if let Some(edges) = edges_for_eval {
                let emb = table.realize_all()?;
                let rec = crate::eval::reconstruction(&emb, edges, cfg.metric)?;
                mean_rank = Some(rec.mean_rank);
                map = Some(rec.map);
            }
        }
        log::info!(
            "epoch {epoch}{}: loss {mean_loss:.6}{}",
            if burn_in { " (burn-in)" } else { "" },
            match (mean_rank, map) {
                (Some(r), Some(m)) => format!(", mean_rank {r:.3}, map {m:.4}"),
                _ => String::new(),
            }
        );
        if !burn_in {
            epochs.push(EpochStats {
                epoch: epoch - cfg.burn_in_epochs,
                loss: mean_loss,
                mean_rank,
                map,
            });
        }
    }

    Ok(TrainRun {
        table,
        epochs,
        degenerate_pairs,
        dir_reinits,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::check_gradient;

    fn logit(p: f64) -> f64 {
        (p / (1.0 - p)).ln()
    }

    #[test]
    fn init_respects_configured_ranges() {
        let mut rng = SeededRng::seed_from_u64(1);
        let t = ReparamTable::init(50, 5, 0.001, -5.0, &mut rng);
        assert_eq!(t.rows(), 50);
        for id in 0..50u32 {
            let row = t.raw_row(id);
            for c in &row[..5] {
                assert!(c.abs() < 0.001);
            }
            assert!((row[5] + 5.0).abs() <= 0.1);
            let r = t.realize(id).unwrap();
            assert!((r.radius - 0.0066928509242848554).abs() < 0.001);
        }
    }

    #[test]
    fn batch_loss_equidistant_negative_is_ln2() {
        // positive and single negative at the same distance from the anchor:
        // softmax is uniform over two candidates, loss = ln 2 exactly.
        let s = logit(0.3);
        let raw = vec![
            1.0, 0.0, s, //  u at (0.3, 0)
            0.0, 1.0, s, //  v at (0, 0.3)
            0.0, -1.0, s, // w at (0, -0.3)
        ];
        let table = ReparamTable::from_raw(2, raw).unwrap();
        let out = batch_loss(&table, &[(0, 1)], &[vec![2]], Metric::Hyperbolic).unwrap();
        assert!((out.loss - 0.6931471805599453).abs() < 1e-12);
        assert_eq!(out.rows.len(), 3);
        assert_eq!(out.degenerate_pairs, 0);
    }

    #[test]
    fn batch_loss_gradient_matches_finite_differences() {
        let mut rng = SeededRng::seed_from_u64(5);
        let n = 6;
        let dim = 4;
        let table = ReparamTable::init(n, dim, 0.5, -1.0, &mut rng);
        let positives = vec![(0u32, 1u32), (2, 3), (1, 4)];
        let negatives = vec![vec![2, 5], vec![0, 5], vec![3, 0]];
        for metric in [Metric::Hyperbolic, Metric::Euclidean] {
            let out = batch_loss(&table, &positives, &negatives, metric).unwrap();
            let mut analytic = vec![0.0; n * (dim + 1)];
            for (id, g) in &out.rows {
                let base = *id as usize * (dim + 1);
                analytic[base..base + dim + 1].copy_from_slice(g);
            }
            let res = check_gradient(
                |raw| {
                    let t = ReparamTable::from_raw(dim, raw.to_vec()).unwrap();
                    batch_loss(&t, &positives, &negatives, metric).unwrap().loss
                },
                table.raw(),
                &analytic,
            );
            assert!(
                res.max_rel_err < 1e-4,
                "{metric}: rel err {} at {} ({} vs {})",
                res.max_rel_err,
                res.worst_index,
                res.analytic,
                res.numeric
            );
        }
    }

    #[test]
    fn positive_pair_is_pulled_together() {
        let mut rng = SeededRng::seed_from_u64(9);
        let mut table = ReparamTable::init(4, 3, 0.5, -1.0, &mut rng);
        let d_before = Metric::Hyperbolic.dist(
            &table.realize(0).unwrap().point,
            &table.realize(1).unwrap().point,
        );
        let out = batch_loss(&table, &[(0, 1)], &[vec![2, 3]], Metric::Hyperbolic).unwrap();
        let stride = table.stride();
        for (id, g) in &out.rows {
            let base = *id as usize * stride;
            for i in 0..stride {
                table.raw_mut()[base + i] -= 0.01 * g[i];
            }
        }
        let d_after = Metric::Hyperbolic.dist(
            &table.realize(0).unwrap().point,
            &table.realize(1).unwrap().point,
        );
        assert!(d_after < d_before);
    }

    #[test]
    fn degenerate_positive_pair_warns_not_crashes() {
        // Two identical rows: distance 0, gradient skipped, loss finite.
        let row = [0.4, 0.2, -1.0];
        let mut raw = Vec::new();
        raw.extend_from_slice(&row);
        raw.extend_from_slice(&row);
        raw.extend_from_slice(&[-0.5, 0.3, -1.0]);
        let table = ReparamTable::from_raw(2, raw).unwrap();
        let out = batch_loss(&table, &[(0, 1)], &[vec![2]], Metric::Hyperbolic).unwrap();
        assert!(out.loss.is_finite());
        assert_eq!(out.degenerate_pairs, 1);
    }

    #[test]
    fn negatives_never_return_the_anchor() {
        let index = NeighborIndex::from_edges(10, &[(0, 1)]);
        let mut rng = SeededRng::seed_from_u64(3);
        for _ in 0..200 {
            for neg in sample_negatives(4, 5, 10, &index, &mut rng) {
                assert_ne!(neg, 4);
            }
        }
    }

    #[test]
    fn negatives_reject_true_neighbors() {
        // u = 0 is connected to everything but node 7: sampling must find 7.
        let edges: Vec<(u32, u32)> = (1..10u32).filter(|v| *v != 7).map(|v| (0, v)).collect();
        let index = NeighborIndex::from_edges(10, &edges);
        let mut rng = SeededRng::seed_from_u64(11);
        let negs = sample_negatives(0, 20, 10, &index, &mut rng);
        assert!(negs.iter().filter(|v| **v == 7).count() >= 15);
    }

    #[test]
    fn neighbor_index_symmetry_modes() {
        let directed = NeighborIndex::from_edges(3, &[(0, 1)]);
        assert!(directed.is_neighbor(0, 1));
        assert!(!directed.is_neighbor(1, 0));
        let symmetric = NeighborIndex::from_pairs_symmetric(3, &[(0, 1)]);
        assert!(symmetric.is_neighbor(0, 1));
        assert!(symmetric.is_neighbor(1, 0));
    }

    fn tiny_tree() -> EdgeList {
        // Balanced binary tree of depth 2: 7 nodes, 6 edges.
        let mut pairs = Vec::new();
        for parent in 0..3u32 {
            pairs.push((format!("n{parent}"), format!("n{}", 2 * parent + 1)));
            pairs.push((format!("n{parent}"), format!("n{}", 2 * parent + 2)));
        }
        EdgeList::from_pairs(pairs).unwrap()
    }

    #[test]
    fn training_reduces_loss_and_stays_in_ball() {
        let data = TrainData::Edges(tiny_tree());
        let cfg = TrainConfig {
            dim: 3,
            epochs: 200,
            lr: 0.05,
            ..Default::default()
        };
        let run = train(&data, &cfg).unwrap();
        assert_eq!(run.epochs.len(), 200);
        // Per-epoch losses are noisy (fresh negative draws), so compare
        // means over the first and last stretches.
        let head: f64 = run.epochs[..10].iter().map(|e| e.loss).sum::<f64>() / 10.0;
        let tail: f64 = run.epochs[190..].iter().map(|e| e.loss).sum::<f64>() / 10.0;
        assert!(tail < head - 0.3, "loss did not fall: {head} -> {tail}");
        let emb = run.table.realize_all().unwrap();
        for id in 0..emb.len() as u32 {
            assert!(crate::ball::norm(emb.point(id)) < 1.0);
        }
    }

    #[test]
    fn training_is_bit_deterministic() {
        let data = TrainData::Edges(tiny_tree());
        let cfg = TrainConfig {
            dim: 3,
            epochs: 3,
            seed: 77,
            ..Default::default()
        };
        let a = train(&data, &cfg).unwrap();
        let b = train(&data, &cfg).unwrap();
        assert_eq!(a.table.raw().len(), b.table.raw().len());
        for (x, y) in a.table.raw().iter().zip(b.table.raw()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn euclidean_toggle_trains_too() {
        let data = TrainData::Edges(tiny_tree());
        let cfg = TrainConfig {
            dim: 3,
            epochs: 60,
            lr: 0.02,
            metric: Metric::Euclidean,
            ..Default::default()
        };
        let run = train(&data, &cfg).unwrap();
        let head: f64 = run.epochs[..10].iter().map(|e| e.loss).sum::<f64>() / 10.0;
        let tail: f64 = run.epochs[50..].iter().map(|e| e.loss).sum::<f64>() / 10.0;
        assert!(tail < head, "euclidean loss did not fall: {head} -> {tail}");
    }

    #[test]
    fn cooc_epoch_draw_count_is_sum_of_ceils() {
        let tokens: Vec<String> = "a b a c a b c d a b"
            .split_whitespace()
            .map(str::to_string)
            .collect();
        let g = crate::corpus::build_cooc(
            &tokens,
            &crate::corpus::CoocConfig {
                window: 2,
                downsample: 0.25,
                ..Default::default()
            },
            &HashSet::new(),
        )
        .unwrap();
        let expected: usize = g.weights().iter().map(|w| w.ceil() as usize).sum();
        let cfg = TrainConfig {
            dim: 2,
            epochs: 1,
            batch_size: 4,
            negatives: 2,
            ..Default::default()
        };
        let run = train(&TrainData::Cooc(g), &cfg).unwrap();
        // ceil(expected / batch) steps in the single epoch
        assert_eq!(run.steps as usize, expected.div_ceil(4));
    }
}
