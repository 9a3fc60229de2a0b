//! Parametric sentence encoder trained on neighbor-sentence prediction.
//!
//! A bidirectional GRU reads the middle sentence of a (prev, mid, next)
//! triple; its concatenated end states, each neighbor token's output
//! embedding, and that token's local-context average are all mapped onto the
//! ball through shared projection heads:
//!
//! ```text
//! dir_raw = W1^T x,  norm_raw = W2^T x + b,  point = sigmoid(norm_raw) * dir_raw/|dir_raw|
//! ```
//!
//! The likelihood of a neighbor token w is softmax over
//! `-lambda_1 d(v_w, f) - lambda_2 d(v_w, c_t)` with both lambdas learned in
//! log space. All gradients are hand-derived; training is plain dense Adam
//! with global-norm clipping and an exponentially halved learning rate.

use rand::{Rng, SeedableRng};

use crate::ball::{dist_and_grad_into, reparam, reparam_grad, Metric, Realized};
use crate::corpus::{Triple, Vocab};
use crate::error::{Error, Result};
use crate::optim::{clip_by_global_norm, AdamHyper, AdamState};
use crate::SeededRng;

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SentConfig {
    /// GRU hidden size per direction.
    pub hidden_dim: usize,
    /// Euclidean embedding width; must equal 2*hidden_dim so the shared
    /// heads accept word vectors, context averages and encoder states alike.
    pub word_dim: usize,
    /// Ball dimension of the final embeddings.
    pub ball_dim: usize,
    pub layer_norm: bool,
    pub metric: Metric,
    /// Context words taken on each side of a predicted token.
    pub context_window: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Steps over which the learning rate halves.
    pub lr_halflife_steps: f64,
    /// Sampled-softmax negatives per predicted token.
    pub negatives: usize,
    /// Full softmax is used while the vocabulary is at most this large.
    pub full_softmax_max_vocab: usize,
    pub clip_norm: f64,
    pub seed: u64,
    pub max_types: usize,
    pub min_count: u64,
    /// Add one synthetic triple per real one, carved from the flat stream.
    pub augment: bool,
    /// Fraction of triples held out for perplexity tracking.
    pub holdout_frac: f64,
    pub norm_bias_init: f64,
}

impl Default for SentConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 50,
            word_dim: 100,
            ball_dim: 20,
            layer_norm: true,
            metric: Metric::Hyperbolic,
            context_window: 2,
            epochs: 5,
            batch_size: 64,
            lr: 0.0008,
            lr_halflife_steps: 100_000.0,
            negatives: 512,
            full_softmax_max_vocab: 2048,
            clip_norm: 5.0,
            seed: 42,
            max_types: 20_000,
            min_count: 1,
            augment: false,
            holdout_frac: 0.1,
            norm_bias_init: -2.0,
        }
    }
}

impl SentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be >= 1".into()));
        }
        if self.word_dim != 2 * self.hidden_dim {
            return Err(Error::Config(format!(
                "word_dim must equal 2*hidden_dim ({} != 2*{}): the projection heads are shared \
                 between word vectors and the concatenated encoder states",
                self.word_dim, self.hidden_dim
            )));
        }
        if self.ball_dim < 2 {
            return Err(Error::Config("ball_dim must be >= 2".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.negatives == 0 {
            return Err(Error::Config(
                "epochs, batch_size and negatives must all be >= 1".into(),
            ));
        }
        if !(self.lr > 0.0) || !(self.clip_norm > 0.0) || !(self.lr_halflife_steps > 0.0) {
            return Err(Error::Config(
                "lr, clip_norm and lr_halflife_steps must be positive".into(),
            ));
        }
        if self.context_window == 0 {
            return Err(Error::Config("context_window must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_frac) {
            return Err(Error::Config("holdout_frac must be in [0, 1)".into()));
        }
        if self.max_types == 0 {
            return Err(Error::Config("max_types must be >= 1".into()));
        }
        Ok(())
    }
}

/// Gate order everywhere: update (z), reset (r), candidate (h).
const GATES: usize = 3;

#[derive(Debug, Clone, Copy)]
pub struct GruOffsets {
    pub w: [usize; GATES],
    pub u: [usize; GATES],
    pub b: [usize; GATES],
}

#[derive(Debug, Clone, Copy)]
pub struct LnOffsets {
    pub gain: [usize; GATES],
    pub bias: [usize; GATES],
}

/// Numeric offsets of every parameter group inside the flat vector.
#[derive(Debug, Clone)]
pub struct Layout {
    pub n_vocab: usize,
    pub d_e: usize,
    pub d_h: usize,
    pub d: usize,
    pub layer_norm: bool,
    pub emb_in: usize,
    pub emb_out: usize,
    /// Index 0 reads the sentence forward, index 1 backward.
    pub gru: [GruOffsets; 2],
    pub ln: Option<[LnOffsets; 2]>,
    pub head_dir: usize,
    pub head_norm: usize,
    pub head_bias: usize,
    pub log_lambda: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(n_vocab: usize, d_e: usize, d_h: usize, d: usize, layer_norm: bool) -> Self {
        let mut off = 0usize;
        let mut take = |len: usize| {
            let at = off;
            off += len;
            at
        };
        let emb_in = take(n_vocab * d_e);
        let emb_out = take(n_vocab * d_e);
        let mut gru = [GruOffsets { w: [0; 3], u: [0; 3], b: [0; 3] }; 2];
        for g in &mut gru {
            for gate in 0..GATES {
                g.w[gate] = take(d_h * d_e);
                g.u[gate] = take(d_h * d_h);
                g.b[gate] = take(d_h);
            }
        }
        let ln = layer_norm.then(|| {
            let mut ln = [LnOffsets { gain: [0; 3], bias: [0; 3] }; 2];
            for l in &mut ln {
                for gate in 0..GATES {
                    l.gain[gate] = take(d_h);
                    l.bias[gate] = take(d_h);
                }
            }
            ln
        });
        let head_dir = take(d_e * d);
        let head_norm = take(d_e);
        let head_bias = take(1);
        let log_lambda = take(2);
        Self {
            n_vocab,
            d_e,
            d_h,
            d,
            layer_norm,
            emb_in,
            emb_out,
            gru,
            ln,
            head_dir,
            head_norm,
            head_bias,
            log_lambda,
            total: off,
        }
    }

    pub fn emb_in_row(&self, id: u32) -> std::ops::Range<usize> {
        let at = self.emb_in + id as usize * self.d_e;
        at..at + self.d_e
    }

    pub fn emb_out_row(&self, id: u32) -> std::ops::Range<usize> {
        let at = self.emb_out + id as usize * self.d_e;
        at..at + self.d_e
    }

    /// Named spans in storage order, for checkpoint manifests.
    pub fn groups(&self) -> Vec<crate::checkpoint::ParamGroup> {
        use crate::checkpoint::ParamGroup;
        let mut out = vec![
            ParamGroup { name: "emb_in".into(), len: self.n_vocab * self.d_e },
            ParamGroup { name: "emb_out".into(), len: self.n_vocab * self.d_e },
        ];
        let gate_names = ["z", "r", "h"];
        for dir in ["fwd", "bwd"] {
            for gate in gate_names {
                out.push(ParamGroup { name: format!("gru_{dir}_w_{gate}"), len: self.d_h * self.d_e });
                out.push(ParamGroup { name: format!("gru_{dir}_u_{gate}"), len: self.d_h * self.d_h });
                out.push(ParamGroup { name: format!("gru_{dir}_b_{gate}"), len: self.d_h });
            }
        }
        if self.layer_norm {
            for dir in ["fwd", "bwd"] {
                for gate in gate_names {
                    out.push(ParamGroup { name: format!("ln_{dir}_{gate}_gain"), len: self.d_h });
                    out.push(ParamGroup { name: format!("ln_{dir}_{gate}_bias"), len: self.d_h });
                }
            }
        }
        out.push(ParamGroup { name: "head_dir".into(), len: self.d_e * self.d });
        out.push(ParamGroup { name: "head_norm".into(), len: self.d_e });
        out.push(ParamGroup { name: "head_norm_bias".into(), len: 1 });
        out.push(ParamGroup { name: "log_lambda".into(), len: 2 });
        out
    }
}

/// A sentence triple mapped to vocabulary ids.
#[derive(Debug, Clone)]
pub struct IdTriple {
    pub prev: Vec<u32>,
    pub mid: Vec<u32>,
    pub next: Vec<u32>,
}

pub fn to_id_triples(triples: &[Triple], vocab: &Vocab) -> Vec<IdTriple> {
    triples
        .iter()
        .map(|t| IdTriple {
            prev: t.prev.iter().map(|w| vocab.id_or_unk(w)).collect(),
            mid: t.mid.iter().map(|w| vocab.id_or_unk(w)).collect(),
            next: t.next.iter().map(|w| vocab.id_or_unk(w)).collect(),
        })
        .collect()
}

pub struct SentModel {
    pub cfg: SentConfig,
    pub vocab: Vocab,
    pub layout: Layout,
    pub params: Vec<f64>,
}

impl SentModel {
    pub fn init(cfg: SentConfig, vocab: Vocab, rng: &mut SeededRng) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(vocab.len(), cfg.word_dim, cfg.hidden_dim, cfg.ball_dim, cfg.layer_norm);
        let mut params = vec![0.0; layout.total];
        let mut uniform = |span: std::ops::Range<usize>, r: f64, params: &mut [f64]| {
            for p in &mut params[span] {
                *p = rng.random_range(-r..r);
            }
        };
        uniform(layout.emb_in..layout.emb_in + 2 * vocab.len() * layout.d_e, 0.1, &mut params);
        for g in &layout.gru {
            for gate in 0..GATES {
                uniform(g.w[gate]..g.w[gate] + layout.d_h * layout.d_e, 0.1, &mut params);
                uniform(g.u[gate]..g.u[gate] + layout.d_h * layout.d_h, 0.1, &mut params);
                // biases stay zero
            }
        }
        if let Some(ln) = &layout.ln {
            for l in ln {
                for gate in 0..GATES {
                    for p in &mut params[l.gain[gate]..l.gain[gate] + layout.d_h] {
                        *p = 1.0;
                    }
                    // ln biases stay zero
                }
            }
        }
        uniform(layout.head_dir..layout.head_dir + layout.d_e * layout.d, 0.1, &mut params);
        uniform(layout.head_norm..layout.head_norm + layout.d_e, 0.1, &mut params);
        params[layout.head_bias] = cfg.norm_bias_init;
        // log-lambdas start at 0: both distance terms weighted 1
        Ok(Self { cfg, vocab, layout, params })
    }

    /// Rebuild from a loaded checkpoint, verifying the stored group layout
    /// matches what this config implies.
    pub fn from_checkpoint(ckpt: crate::checkpoint::SentCheckpoint) -> Result<Self> {
        let cfg: SentConfig = serde_json::from_value(ckpt.config)?;
        let model = Self::from_parts(cfg, ckpt.vocab, ckpt.params)?;
        let expect = model.layout.groups();
        if ckpt.groups.len() != expect.len()
            || ckpt.groups.iter().zip(&expect).any(|(a, b)| a.name != b.name || a.len != b.len)
        {
            return Err(Error::Checkpoint(
                "stored parameter groups do not match the configured layout".into(),
            ));
        }
        Ok(model)
    }

    pub fn from_parts(cfg: SentConfig, vocab: Vocab, params: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        let layout = Layout::new(vocab.len(), cfg.word_dim, cfg.hidden_dim, cfg.ball_dim, cfg.layer_norm);
        if params.len() != layout.total {
            return Err(Error::Checkpoint(format!(
                "parameter vector has {} values, layout needs {}",
                params.len(),
                layout.total
            )));
        }
        Ok(Self { cfg, vocab, layout, params })
    }

    pub fn lambdas(&self) -> (f64, f64) {
        (
            self.params[self.layout.log_lambda].exp(),
            self.params[self.layout.log_lambda + 1].exp(),
        )
    }

    /// Every vocabulary word's output embedding pushed through the shared
    /// heads onto the ball.
    pub fn word_embeddings(&self) -> Result<crate::eval::EmbeddingSet> {
        let mut flat = Vec::with_capacity(self.vocab.len() * self.layout.d);
        for w in 0..self.vocab.len() as u32 {
            let r = head_forward(&self.params, &self.layout, &self.params[self.layout.emb_out_row(w)])?;
            flat.extend_from_slice(&r.point);
        }
        crate::eval::EmbeddingSet::from_flat(self.layout.d, flat)
    }

    /// Ball embedding of a tokenized sentence (unknown words become UNK).
    pub fn encode(&self, tokens: &[String]) -> Result<crate::ball::BallPoint> {
        if tokens.is_empty() {
            return Err(Error::InvalidInput("cannot encode an empty sentence".into()));
        }
        let ids: Vec<u32> = tokens.iter().map(|t| self.vocab.id_or_unk(t)).collect();
        let r = self.encode_ids(&ids)?;
        crate::ball::BallPoint::new(r.realized.point)
    }

    pub(crate) fn encode_ids(&self, ids: &[u32]) -> Result<Encoded> {
        encode_ids(&self.params, &self.layout, ids)
    }
}

// ---------------------------------------------------------------------------
// layer norm

struct LnCache {
    xhat: Vec<f64>,
    inv_sigma: f64,
}

fn ln_forward(x: &mut [f64], gain: &[f64], bias: &[f64]) -> LnCache {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv_sigma = 1.0 / (var + LN_EPS).sqrt();
    let mut xhat = Vec::with_capacity(x.len());
    for (i, v) in x.iter_mut().enumerate() {
        let h = (*v - mean) * inv_sigma;
        xhat.push(h);
        *v = gain[i] * h + bias[i];
    }
    LnCache { xhat, inv_sigma }
}

/// dy is consumed; dgain/dbias/dx accumulate.
fn ln_backward(
    dy: &[f64],
    cache: &LnCache,
    gain: &[f64],
    dgain: &mut [f64],
    dbias: &mut [f64],
    dx: &mut [f64],
) {
    let n = dy.len() as f64;
    let mut sum_dxhat = 0.0;
    let mut sum_dxhat_xhat = 0.0;
    for i in 0..dy.len() {
        dgain[i] += dy[i] * cache.xhat[i];
        dbias[i] += dy[i];
        let dxh = dy[i] * gain[i];
        sum_dxhat += dxh;
        sum_dxhat_xhat += dxh * cache.xhat[i];
    }
    for i in 0..dy.len() {
        let dxh = dy[i] * gain[i];
        dx[i] += cache.inv_sigma * (dxh - sum_dxhat / n - cache.xhat[i] * sum_dxhat_xhat / n);
    }
}

// ---------------------------------------------------------------------------
// GRU

struct StepCache {
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    hc: Vec<f64>,
    rh: Vec<f64>,
    ln: Option<[LnCache; GATES]>,
    h: Vec<f64>,
}

fn matvec(a: &[f64], x: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for i in 0..rows {
        let row = &a[i * cols..(i + 1) * cols];
        let mut acc = 0.0;
        for j in 0..cols {
            acc += row[j] * x[j];
        }
        out[i] += acc;
    }
}

/// One GRU step. With every weight zero the update gate is 1/2 and the
/// candidate 0, so h becomes h_prev/2.
fn gru_step(
    p: &[f64],
    g: &GruOffsets,
    ln: Option<&LnOffsets>,
    d_e: usize,
    d_h: usize,
    x: &[f64],
    h_prev: &[f64],
) -> StepCache {
    let mut pre = [vec![0.0; d_h], vec![0.0; d_h], vec![0.0; d_h]];
    // update and reset gates read h_prev directly
    for gate in [0usize, 1] {
        pre[gate].copy_from_slice(&p[g.b[gate]..g.b[gate] + d_h]);
        matvec(&p[g.w[gate]..g.w[gate] + d_h * d_e], x, d_h, d_e, &mut pre[gate]);
        matvec(&p[g.u[gate]..g.u[gate] + d_h * d_h], h_prev, d_h, d_h, &mut pre[gate]);
    }
    let mut ln_caches: Option<[LnCache; GATES]> = None;
    let ln_gate = |gate: usize, pre: &mut [f64], caches: &mut Option<[LnCache; GATES]>| {
        if let Some(l) = ln {
            let c = ln_forward(pre, &p[l.gain[gate]..l.gain[gate] + d_h], &p[l.bias[gate]..l.bias[gate] + d_h]);
            match caches {
                Some(arr) => arr[gate] = c,
                None => {
                    *caches = Some([
                        LnCache { xhat: Vec::new(), inv_sigma: 0.0 },
                        LnCache { xhat: Vec::new(), inv_sigma: 0.0 },
                        LnCache { xhat: Vec::new(), inv_sigma: 0.0 },
                    ]);
                    caches.as_mut().unwrap()[gate] = c;
                }
            }
        }
    };
    let mut pre_z = std::mem::take(&mut pre[0]);
    let mut pre_r = std::mem::take(&mut pre[1]);
    ln_gate(0, &mut pre_z, &mut ln_caches);
    ln_gate(1, &mut pre_r, &mut ln_caches);
    let z: Vec<f64> = pre_z.iter().map(|v| crate::ball::sigmoid(*v)).collect();
    let r: Vec<f64> = pre_r.iter().map(|v| crate::ball::sigmoid(*v)).collect();

    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let mut pre_h = vec![0.0; d_h];
    pre_h.copy_from_slice(&p[g.b[2]..g.b[2] + d_h]);
    matvec(&p[g.w[2]..g.w[2] + d_h * d_e], x, d_h, d_e, &mut pre_h);
    matvec(&p[g.u[2]..g.u[2] + d_h * d_h], &rh, d_h, d_h, &mut pre_h);
    ln_gate(2, &mut pre_h, &mut ln_caches);
    let hc: Vec<f64> = pre_h.iter().map(|v| v.tanh()).collect();

    let h: Vec<f64> = (0..d_h).map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * hc[i]).collect();
    StepCache { h_prev: h_prev.to_vec(), z, r, hc, rh, ln: ln_caches, h }
}

/// BPTT for one step: consumes dh (gradient at this step's output), returns
/// the gradient at h_prev; weight/input gradients accumulate into `grad`.
#[allow(clippy::too_many_arguments)]
fn gru_step_backward(
    p: &[f64],
    g: &GruOffsets,
    ln: Option<&LnOffsets>,
    d_e: usize,
    d_h: usize,
    x: &[f64],
    cache: &StepCache,
    dh: &[f64],
    grad: &mut [f64],
    dx: &mut [f64],
) -> Vec<f64> {
    let mut dh_prev: Vec<f64> = (0..d_h).map(|i| dh[i] * (1.0 - cache.z[i])).collect();
    let dz: Vec<f64> = (0..d_h).map(|i| dh[i] * (cache.hc[i] - cache.h_prev[i])).collect();
    let dhc: Vec<f64> = (0..d_h).map(|i| dh[i] * cache.z[i]).collect();

    // candidate gate: tanh, then LN backward, then W/U/b
    let da_h: Vec<f64> = (0..d_h).map(|i| dhc[i] * (1.0 - cache.hc[i] * cache.hc[i])).collect();
    let mut dpre = vec![0.0; d_h];
    backprop_gate(p, ln, 2, d_h, &da_h, cache, grad, &mut dpre);
    accumulate_gate(p, g, 2, d_e, d_h, x, &cache.rh, &dpre, grad, dx);
    // through rh = r .* h_prev
    let mut drh = vec![0.0; d_h];
    matvec_t(&p[g.u[2]..g.u[2] + d_h * d_h], &dpre, d_h, d_h, &mut drh);
    let dr: Vec<f64> = (0..d_h).map(|i| drh[i] * cache.h_prev[i]).collect();
    for i in 0..d_h {
        dh_prev[i] += drh[i] * cache.r[i];
    }

    // reset gate
    let da_r: Vec<f64> = (0..d_h).map(|i| dr[i] * cache.r[i] * (1.0 - cache.r[i])).collect();
    dpre.iter_mut().for_each(|v| *v = 0.0);
    backprop_gate(p, ln, 1, d_h, &da_r, cache, grad, &mut dpre);
    accumulate_gate(p, g, 1, d_e, d_h, x, &cache.h_prev, &dpre, grad, dx);
    matvec_t_acc(&p[g.u[1]..g.u[1] + d_h * d_h], &dpre, d_h, d_h, &mut dh_prev);

    // update gate
    let da_z: Vec<f64> = (0..d_h).map(|i| dz[i] * cache.z[i] * (1.0 - cache.z[i])).collect();
    dpre.iter_mut().for_each(|v| *v = 0.0);
    backprop_gate(p, ln, 0, d_h, &da_z, cache, grad, &mut dpre);
    accumulate_gate(p, g, 0, d_e, d_h, x, &cache.h_prev, &dpre, grad, dx);
    matvec_t_acc(&p[g.u[0]..g.u[0] + d_h * d_h], &dpre, d_h, d_h, &mut dh_prev);

    dh_prev
}

/// dy at the gate's activation input -> dpre at the gate's linear output,
/// through layer norm when present.
fn backprop_gate(
    p: &[f64],
    ln: Option<&LnOffsets>,
    gate: usize,
    d_h: usize,
    dy: &[f64],
    cache: &StepCache,
    grad: &mut [f64],
    dpre: &mut Vec<f64>,
) {
    match (ln, &cache.ln) {
        (Some(l), Some(caches)) => {
            let (gain_at, bias_at) = (l.gain[gate], l.bias[gate]);
            // split borrows: copy gain out, accumulate into grad spans by index
            let gain: Vec<f64> = p[gain_at..gain_at + d_h].to_vec();
            let mut dgain = vec![0.0; d_h];
            let mut dbias = vec![0.0; d_h];
            ln_backward(dy, &caches[gate], &gain, &mut dgain, &mut dbias, dpre);
            for i in 0..d_h {
                grad[gain_at + i] += dgain[i];
                grad[bias_at + i] += dbias[i];
            }
        }
        _ => {
            for i in 0..d_h {
                dpre[i] += dy[i];
            }
        }
    }
}

/// Accumulate dW, dU, db and dx for one gate given dpre and the vector the
/// U matrix consumed (h_prev, or r.*h_prev for the candidate gate).
#[allow(clippy::too_many_arguments)]
fn accumulate_gate(
    p: &[f64],
    g: &GruOffsets,
    gate: usize,
    d_e: usize,
    d_h: usize,
    x: &[f64],
    u_input: &[f64],
    dpre: &[f64],
    grad: &mut [f64],
    dx: &mut [f64],
) {
    for i in 0..d_h {
        let dpi = dpre[i];
        if dpi == 0.0 {
            continue;
        }
        let wrow = g.w[gate] + i * d_e;
        for j in 0..d_e {
            grad[wrow + j] += dpi * x[j];
        }
        let urow = g.u[gate] + i * d_h;
        for j in 0..d_h {
            grad[urow + j] += dpi * u_input[j];
        }
        grad[g.b[gate] + i] += dpi;
    }
    matvec_t_acc(&p[g.w[gate]..g.w[gate] + d_h * d_e], dpre, d_h, d_e, dx);
}

fn matvec_t(a: &[f64], y: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    matvec_t_acc(a, y, rows, cols, out);
}

/// out[j] += sum_i a[i,j] * y[i]
fn matvec_t_acc(a: &[f64], y: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for i in 0..rows {
        let yi = y[i];
        if yi == 0.0 {
            continue;
        }
        let row = &a[i * cols..(i + 1) * cols];
        for j in 0..cols {
            out[j] += yi * row[j];
        }
    }
}

// ---------------------------------------------------------------------------
// encoder = two GRU passes + shared heads

pub(crate) struct Encoded {
    pub realized: Realized,
    /// Concatenated end states [fwd_last ; bwd_first], the head input.
    x: Vec<f64>,
    fwd: Vec<StepCache>,
    bwd: Vec<StepCache>,
}

fn encode_ids(p: &[f64], layout: &Layout, ids: &[u32]) -> Result<Encoded> {
    if ids.is_empty() {
        return Err(Error::InvalidInput("cannot encode an empty sentence".into()));
    }
    let (d_e, d_h) = (layout.d_e, layout.d_h);
    let run = |dir: usize, order: &mut dyn Iterator<Item = u32>| -> Vec<StepCache> {
        let ln = layout.ln.as_ref().map(|l| &l[dir]);
        let mut h = vec![0.0; d_h];
        let mut caches = Vec::new();
        for id in order {
            let x = &p[layout.emb_in_row(id)];
            let c = gru_step(p, &layout.gru[dir], ln, d_e, d_h, x, &h);
            h = c.h.clone();
            caches.push(c);
        }
        caches
    };
    let fwd = run(0, &mut ids.iter().copied());
    let bwd = run(1, &mut ids.iter().rev().copied());
    let mut x = Vec::with_capacity(2 * d_h);
    x.extend_from_slice(&fwd.last().unwrap().h);
    x.extend_from_slice(&bwd.last().unwrap().h);
    let realized = head_forward(p, layout, &x)?;
    Ok(Encoded { realized, x, fwd, bwd })
}

/// Backpropagate a gradient at the encoder's head input through both GRU
/// passes (weights, layer norms, and the consumed input embeddings).
fn encode_backward(p: &[f64], layout: &Layout, ids: &[u32], enc: &Encoded, dx: &[f64], grad: &mut [f64]) {
    let (d_e, d_h) = (layout.d_e, layout.d_h);
    let back = |dir: usize, order: Vec<u32>, caches: &[StepCache], dh_last: &[f64], grad: &mut [f64]| {
        let ln = layout.ln.as_ref().map(|l| &l[dir]);
        let mut dh = dh_last.to_vec();
        let mut dxe = vec![0.0; d_e];
        for (t, id) in order.iter().enumerate().rev() {
            let x = p[layout.emb_in_row(*id)].to_vec();
            dxe.iter_mut().for_each(|v| *v = 0.0);
            dh = gru_step_backward(p, &layout.gru[dir], ln, d_e, d_h, &x, &caches[t], &dh, grad, &mut dxe);
            let row = layout.emb_in_row(*id);
            for (j, v) in dxe.iter().enumerate() {
                grad[row.start + j] += v;
            }
        }
    };
    back(0, ids.to_vec(), &enc.fwd, &dx[..d_h], grad);
    let rev: Vec<u32> = ids.iter().rev().copied().collect();
    back(1, rev, &enc.bwd, &dx[d_h..], grad);
}

// ---------------------------------------------------------------------------
// projection heads

fn head_forward(p: &[f64], layout: &Layout, x: &[f64]) -> Result<Realized> {
    let (d_e, d) = (layout.d_e, layout.d);
    let mut raw = vec![0.0; d + 1];
    for i in 0..d_e {
        let xi = x[i];
        let row = layout.head_dir + i * d;
        for k in 0..d {
            raw[k] += p[row + k] * xi;
        }
        raw[d] += p[layout.head_norm + i] * xi;
    }
    raw[d] += p[layout.head_bias];
    reparam(&raw)
}

/// Pull a gradient at the realized ball point back through the re-param and
/// the shared heads; accumulates into grad and into dx (the stream input).
fn head_backward(
    p: &[f64],
    layout: &Layout,
    r: &Realized,
    dtheta: &[f64],
    x: &[f64],
    grad: &mut [f64],
    dx: &mut [f64],
) {
    let (d_e, d) = (layout.d_e, layout.d);
    let mut draw = vec![0.0; d + 1];
    reparam_grad(r, dtheta, &mut draw);
    let dnorm = draw[d];
    for i in 0..d_e {
        let xi = x[i];
        let row = layout.head_dir + i * d;
        let mut acc = 0.0;
        for k in 0..d {
            grad[row + k] += xi * draw[k];
            acc += p[row + k] * draw[k];
        }
        grad[layout.head_norm + i] += xi * dnorm;
        dx[i] += acc + p[layout.head_norm + i] * dnorm;
    }
    grad[layout.head_bias] += dnorm;
}

// ---------------------------------------------------------------------------
// loss

/// How the softmax normalization set is built for each predicted token.
pub enum SoftmaxMode {
    /// Normalize over the whole vocabulary.
    Full,
    /// Target plus k uniform draws from V minus the target (duplicates kept).
    Sampled { negatives: usize },
    /// Externally fixed candidate lists, one per predicted token in batch
    /// order (each must contain the target). Used by tests.
    Explicit(Vec<Vec<u32>>),
}

pub struct SentGrads {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub tokens: usize,
    pub degenerate_pairs: usize,
    pub empty_contexts: usize,
}

/// Mean negative log-likelihood of every neighbor-sentence token in the
/// batch, plus the full parameter gradient. Tokens whose context window is
/// empty keep only the encoder-distance term.
pub fn sent_loss(
    p: &[f64],
    layout: &Layout,
    cfg: &SentConfig,
    batch: &[IdTriple],
    mode: &SoftmaxMode,
    rng: &mut SeededRng,
) -> Result<SentGrads> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let (d_e, d) = (layout.d_e, layout.d);
    let n_vocab = layout.n_vocab;
    let lambda1 = p[layout.log_lambda].exp();
    let lambda2 = p[layout.log_lambda + 1].exp();
    let k_ctx = cfg.context_window;

    let total_tokens: usize = batch.iter().map(|t| t.prev.len() + t.next.len()).sum();
    if total_tokens == 0 {
        return Err(Error::InvalidInput("batch predicts no tokens".into()));
    }
    let inv_n = 1.0 / total_tokens as f64;

    let mut grad = vec![0.0; layout.total];
    let mut loss = 0.0;
    let mut degenerate = 0usize;
    let mut empty_contexts = 0usize;

    // Realize every vocabulary word once per batch in full mode; sampled
    // mode realizes candidates on demand (usually a small subset).
    let full = matches!(mode, SoftmaxMode::Full);
    let mut word_realized: Vec<Option<Realized>> = Vec::new();
    if full {
        word_realized = (0..n_vocab as u32)
            .map(|w| head_forward(p, layout, &p[layout.emb_out_row(w)]))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .map(Some)
            .collect();
    }
    let realize_word = |w: u32, cache: &mut Vec<Option<Realized>>| -> Result<Realized> {
        if full {
            Ok(cache[w as usize].clone().expect("realized in batch prologue"))
        } else {
            head_forward(p, layout, &p[layout.emb_out_row(w)])
        }
    };

    // Gradients at each word's ball point accumulate across the whole batch
    // so the heads run once per touched word.
    let mut word_dtheta: std::collections::BTreeMap<u32, Vec<f64>> = std::collections::BTreeMap::new();
    let mut dlog_lambda = [0.0f64; 2];

    let mut gu = vec![0.0; d];
    let mut gv = vec![0.0; d];
    let mut explicit_cursor = 0usize;

    for triple in batch {
        let enc = encode_ids(p, layout, &triple.mid)?;
        let mut f_dtheta = vec![0.0; d];

        // Candidate set shared by every token of this triple in full mode:
        // distances to the encoder point can be computed once.
        let mut f_dist: Vec<f64> = Vec::new();
        let mut f_gw: Vec<f64> = Vec::new(); // grad wrt word point, flattened
        let mut f_gf: Vec<f64> = Vec::new(); // grad wrt encoder point
        if full {
            f_dist = vec![0.0; n_vocab];
            f_gw = vec![0.0; n_vocab * d];
            f_gf = vec![0.0; n_vocab * d];
            for w in 0..n_vocab {
                let rw = word_realized[w].as_ref().expect("realized");
                let (dist, degen) = dist_and_grad_into(
                    cfg.metric,
                    &rw.point,
                    &enc.realized.point,
                    &mut gu,
                    &mut gv,
                );
                f_dist[w] = dist;
                if degen {
                    degenerate += 1;
                } else {
                    f_gw[w * d..(w + 1) * d].copy_from_slice(&gu);
                    f_gf[w * d..(w + 1) * d].copy_from_slice(&gv);
                }
            }
        }

        for (sent_idx, sentence) in [&triple.prev, &triple.next].into_iter().enumerate() {
            let _ = sent_idx;
            for (t, &target) in sentence.iter().enumerate() {
                // local context average with the fixed 1/(2K) divisor
                let mut ctx_ids: Vec<u32> = Vec::with_capacity(2 * k_ctx);
                for off in 1..=k_ctx {
                    if t >= off {
                        ctx_ids.push(sentence[t - off]);
                    }
                    if t + off < sentence.len() {
                        ctx_ids.push(sentence[t + off]);
                    }
                }
                let ctx = if ctx_ids.is_empty() {
                    empty_contexts += 1;
                    None
                } else {
                    let mut cx = vec![0.0; d_e];
                    let scale = 1.0 / (2 * k_ctx) as f64;
                    for id in &ctx_ids {
                        let row = layout.emb_in_row(*id);
                        for (j, v) in p[row].iter().enumerate() {
                            cx[j] += v * scale;
                        }
                    }
                    Some((head_forward(p, layout, &cx)?, cx))
                };

                // normalization set
                let cands: Vec<u32> = match mode {
                    SoftmaxMode::Full => (0..n_vocab as u32).collect(),
                    SoftmaxMode::Sampled { negatives } => {
                        let mut c = Vec::with_capacity(negatives + 1);
                        c.push(target);
                        for _ in 0..*negatives {
                            let mut w = rng.random_range(0..n_vocab as u32 - 1);
                            if w >= target {
                                w += 1;
                            }
                            c.push(w);
                        }
                        c
                    }
                    SoftmaxMode::Explicit(lists) => {
                        let c = lists
                            .get(explicit_cursor)
                            .ok_or_else(|| Error::InvalidInput("explicit candidate lists exhausted".into()))?
                            .clone();
                        explicit_cursor += 1;
                        if !c.contains(&target) {
                            return Err(Error::InvalidInput(
                                "explicit candidate list is missing the target".into(),
                            ));
                        }
                        c
                    }
                };

                // logits; in full mode the encoder distances come from the
                // per-triple cache, otherwise they are computed here
                let mut logits = Vec::with_capacity(cands.len());
                let mut local: Vec<(f64, Option<Realized>)> = Vec::with_capacity(cands.len());
                for &w in &cands {
                    let (d1, rw) = if full {
                        (f_dist[w as usize], None)
                    } else {
                        let rw = realize_word(w, &mut word_realized)?;
                        let (dist, degen) = dist_and_grad_into(
                            cfg.metric,
                            &rw.point,
                            &enc.realized.point,
                            &mut gu,
                            &mut gv,
                        );
                        if degen {
                            degenerate += 1;
                        }
                        (dist, Some(rw))
                    };
                    let mut logit = -lambda1 * d1;
                    if let Some((rc, _)) = &ctx {
                        let rw_point: &[f64] = match &rw {
                            Some(r) => &r.point,
                            None => &word_realized[w as usize].as_ref().unwrap().point,
                        };
                        let d2 = cfg.metric.dist(rw_point, &rc.point);
                        logit -= lambda2 * d2;
                    }
                    logits.push(logit);
                    local.push((d1, rw));
                }

                let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
                let target_pos = cands.iter().position(|w| *w == target).expect("target in set");
                loss += (lse - logits[target_pos]) * inv_n;

                // gradient at each logit, then through both distance terms
                let mut ctx_dtheta = vec![0.0; d];
                for (j, &w) in cands.iter().enumerate() {
                    let prob = (logits[j] - lse).exp();
                    let g_logit = (prob - if j == target_pos { 1.0 } else { 0.0 }) * inv_n;
                    if g_logit == 0.0 {
                        continue;
                    }
                    let (d1, rw) = &local[j];
                    let dd1 = g_logit * -lambda1;
                    dlog_lambda[0] += g_logit * -lambda1 * d1;
                    let wd = word_dtheta.entry(w).or_insert_with(|| vec![0.0; d]);
                    if full {
                        let base = w as usize * d;
                        for i in 0..d {
                            wd[i] += dd1 * f_gw[base + i];
                            f_dtheta[i] += dd1 * f_gf[base + i];
                        }
                    } else {
                        let rw = rw.as_ref().expect("sampled mode realizes locally");
                        let (_, degen) =
                            dist_and_grad_into(cfg.metric, &rw.point, &enc.realized.point, &mut gu, &mut gv);
                        if !degen {
                            for i in 0..d {
                                wd[i] += dd1 * gu[i];
                                f_dtheta[i] += dd1 * gv[i];
                            }
                        }
                    }
                    if let Some((rc, _)) = &ctx {
                        let rw_point: &[f64] = match rw {
                            Some(r) => &r.point,
                            None => &word_realized[w as usize].as_ref().unwrap().point,
                        };
                        let (d2, degen) =
                            dist_and_grad_into(cfg.metric, rw_point, &rc.point, &mut gu, &mut gv);
                        let dd2 = g_logit * -lambda2;
                        dlog_lambda[1] += g_logit * -lambda2 * d2;
                        if degen {
                            degenerate += 1;
                        } else {
                            for i in 0..d {
                                wd[i] += dd2 * gu[i];
                                ctx_dtheta[i] += dd2 * gv[i];
                            }
                        }
                    }
                }

                // context point backward: heads, then spread over the window
                if let Some((rc, cx)) = &ctx {
                    if ctx_dtheta.iter().any(|v| *v != 0.0) {
                        let mut dcx = vec![0.0; d_e];
                        head_backward(p, layout, rc, &ctx_dtheta, cx, &mut grad, &mut dcx);
                        let scale = 1.0 / (2 * k_ctx) as f64;
                        for id in &ctx_ids {
                            let row = layout.emb_in_row(*id);
                            for (j, v) in dcx.iter().enumerate() {
                                grad[row.start + j] += v * scale;
                            }
                        }
                    }
                }
            }
        }

        // encoder backward once per triple
        if f_dtheta.iter().any(|v| *v != 0.0) {
            let mut dxf = vec![0.0; d_e];
            head_backward(p, layout, &enc.realized, &f_dtheta, &enc.x, &mut grad, &mut dxf);
            encode_backward(p, layout, &triple.mid, &enc, &dxf, &mut grad);
        }
    }

    // word heads once per touched word
    for (w, dtheta) in &word_dtheta {
        if dtheta.iter().all(|v| *v == 0.0) {
            continue;
        }
        let rw = if full {
            word_realized[*w as usize].clone().expect("realized")
        } else {
            head_forward(p, layout, &p[layout.emb_out_row(*w)])?
        };
        let row = layout.emb_out_row(*w);
        let x = p[row.clone()].to_vec();
        let mut dxw = vec![0.0; d_e];
        head_backward(p, layout, &rw, dtheta, &x, &mut grad, &mut dxw);
        for (j, v) in dxw.iter().enumerate() {
            grad[row.start + j] += v;
        }
    }

    grad[layout.log_lambda] += dlog_lambda[0];
    grad[layout.log_lambda + 1] += dlog_lambda[1];

    Ok(SentGrads {
        loss,
        grad,
        tokens: total_tokens,
        degenerate_pairs: degenerate,
        empty_contexts,
    })
}

/// exp(mean token NLL) over the triples, always with the full softmax.
pub fn perplexity(model: &SentModel, triples: &[IdTriple]) -> Result<f64> {
    if triples.is_empty() {
        return Err(Error::InvalidInput("no triples to evaluate".into()));
    }
    let mut rng = SeededRng::seed_from_u64(0); // unused by Full mode
    let out = sent_loss(&model.params, &model.layout, &model.cfg, triples, &SoftmaxMode::Full, &mut rng)?;
    Ok(out.loss.exp())
}

// ---------------------------------------------------------------------------
// training

#[derive(Debug, Clone, serde::Serialize)]
pub struct SentEpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub holdout_perplexity: Option<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
}

pub struct SentRun {
    pub model: SentModel,
    pub epochs: Vec<SentEpochStats>,
    /// Mean token NLL of the untrained model on the training triples
    /// (full softmax; omitted for sampled-softmax vocabularies).
    pub initial_loss: Option<f64>,
    pub untrained_perplexity: Option<f64>,
    pub holdout: Vec<IdTriple>,
    pub degenerate_pairs: u64,
    pub empty_contexts: u64,
    pub steps: u64,
}

/// Build the vocabulary (with an UNK slot), extract triples, split a
/// holdout, and run Adam over shuffled batches.
pub fn train_sent(sentences: &[Vec<String>], cfg: &SentConfig) -> Result<SentRun> {
    cfg.validate()?;
    let vocab = Vocab::build_with_unk(
        sentences.iter().flatten().map(String::as_str),
        Some(cfg.max_types),
        cfg.min_count,
    )?;
    if vocab.len() < 2 {
        return Err(Error::Config("vocabulary must have at least 2 types".into()));
    }
    let triples = crate::corpus::extract_triples(sentences, cfg.augment, cfg.seed)?;
    let mut id_triples = to_id_triples(&triples, &vocab);

    let mut rng = SeededRng::seed_from_u64(cfg.seed);
    use rand::seq::SliceRandom;
    id_triples.shuffle(&mut rng);
    let n_holdout = ((id_triples.len() as f64) * cfg.holdout_frac).round() as usize;
    let holdout: Vec<IdTriple> = id_triples.split_off(id_triples.len() - n_holdout);
    if id_triples.is_empty() {
        return Err(Error::Config(
            "holdout fraction leaves no training triples".into(),
        ));
    }

    let mut model = SentModel::init(cfg.clone(), vocab, &mut rng)?;
    let mode = if model.vocab.len() <= cfg.full_softmax_max_vocab {
        SoftmaxMode::Full
    } else {
        SoftmaxMode::Sampled { negatives: cfg.negatives }
    };
    let untrained_perplexity = if holdout.is_empty() {
        None
    } else {
        Some(perplexity(&model, &holdout)?)
    };
    let initial_loss = if matches!(mode, SoftmaxMode::Full) {
        Some(perplexity(&model, &id_triples)?.ln())
    } else {
        None
    };

    let mut adam = AdamState::new(model.layout.total);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut degenerate = 0u64;
    let mut empty_ctx = 0u64;
    let mut steps = 0u64;

    for epoch in 1..=cfg.epochs {
        id_triples.shuffle(&mut rng);
        let mut loss_weighted = 0.0;
        let mut tokens_total = 0usize;
        for batch in id_triples.chunks(cfg.batch_size) {
            let mut out = sent_loss(&model.params, &model.layout, cfg, batch, &mode, &mut rng)?;
            degenerate += out.degenerate_pairs as u64;
            empty_ctx += out.empty_contexts as u64;
            {
                let mut named = [("sent_params", out.grad.as_mut_slice())];
                clip_by_global_norm(&mut named, cfg.clip_norm)?;
            }
            let lr = cfg.lr * (-(steps as f64) / cfg.lr_halflife_steps).exp2();
            adam.step(&mut model.params, &out.grad, &AdamHyper::new(lr));
            steps += 1;
            loss_weighted += out.loss * out.tokens as f64;
            tokens_total += out.tokens;
        }
        let mean_loss = loss_weighted / tokens_total as f64;
        let holdout_perplexity = if holdout.is_empty() {
            None
        } else {
            Some(perplexity(&model, &holdout)?)
        };
        let (l1, l2) = model.lambdas();
        log::info!(
            "epoch {epoch}: token loss {mean_loss:.4}, lambda1 {l1:.4}, lambda2 {l2:.4}{}",
            holdout_perplexity
                .map(|p| format!(", holdout ppl {p:.3}"))
                .unwrap_or_default()
        );
        epochs.push(SentEpochStats {
            epoch,
            loss: mean_loss,
            holdout_perplexity,
            lambda1: l1,
            lambda2: l2,
        });
    }

    Ok(SentRun {
        model,
        epochs,
        initial_loss,
        untrained_perplexity,
        holdout,
        degenerate_pairs: degenerate,
        empty_contexts: empty_ctx,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::check_gradient;

    fn tiny_cfg() -> SentConfig {
        SentConfig {
            hidden_dim: 3,
            word_dim: 6,
            ball_dim: 4,
            epochs: 2,
            batch_size: 4,
            lr: 0.01,
            seed: 11,
            holdout_frac: 0.0,
            ..Default::default()
        }
    }

    fn tiny_vocab(n: usize) -> Vocab {
        let tokens: Vec<String> = (0..n - 1).map(|i| format!("w{i}")).collect();
        let mut tokens = tokens;
        tokens.push(crate::corpus::UNK_TOKEN.to_string());
        let freqs: Vec<u64> = (0..n).map(|i| (n - i) as u64).collect();
        Vocab::from_parts(tokens, freqs, Some(n as u32 - 1)).unwrap()
    }

    fn tiny_model(seed: u64) -> SentModel {
        let mut rng = SeededRng::seed_from_u64(seed);
        SentModel::init(tiny_cfg(), tiny_vocab(5), &mut rng).unwrap()
    }

    fn tiny_batch() -> Vec<IdTriple> {
        vec![
            IdTriple { prev: vec![0, 1], mid: vec![2, 3, 0], next: vec![4, 1, 2] },
            IdTriple { prev: vec![3], mid: vec![1, 4], next: vec![0, 2] },
        ]
    }

    #[test]
    fn word_dim_must_be_twice_hidden() {
        let cfg = SentConfig { hidden_dim: 3, word_dim: 7, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn layout_groups_tile_the_vector() {
        let m = tiny_model(1);
        let total: usize = m.layout.groups().iter().map(|g| g.len).sum();
        assert_eq!(total, m.layout.total);
        assert_eq!(m.params.len(), m.layout.total);
        // lambdas are the final two entries
        assert_eq!(m.layout.log_lambda + 2, m.layout.total);
        let names: std::collections::HashSet<String> =
            m.layout.groups().iter().map(|g| g.name.clone()).collect();
        assert_eq!(names.len(), m.layout.groups().len());
    }

    #[test]
    fn zero_weight_gru_halves_the_state() {
        let m = tiny_model(2);
        let layout = &m.layout;
        let p = vec![0.0; layout.total];
        let h_prev = vec![0.4, -0.6, 1.2];
        let x = vec![0.0; layout.d_e];
        let ln = layout.ln.as_ref().map(|l| &l[0]);
        let c = gru_step(&p, &layout.gru[0], ln, layout.d_e, layout.d_h, &x, &h_prev);
        for (a, b) in c.h.iter().zip(&h_prev) {
            assert!((a - b / 2.0).abs() < 1e-12, "{a} vs {}", b / 2.0);
        }
    }

    #[test]
    fn encoder_output_lands_in_ball() {
        let m = tiny_model(3);
        let enc = m.encode_ids(&[0, 2, 4, 1]).unwrap();
        let norm: f64 = enc.realized.point.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!(norm < 1.0);
        assert!(m.encode(&["w0".into(), "zzz-unknown".into()]).is_ok());
        assert!(matches!(
            m.encode(&[]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn full_softmax_gradient_matches_finite_differences() {
        let m = tiny_model(7);
        let batch = tiny_batch();
        let mut rng = SeededRng::seed_from_u64(0);
        let out = sent_loss(&m.params, &m.layout, &m.cfg, &batch, &SoftmaxMode::Full, &mut rng).unwrap();
        assert!(out.loss.is_finite());
        assert_eq!(out.tokens, 8);
        let layout = m.layout.clone();
        let cfg = m.cfg.clone();
        let res = check_gradient(
            |params| {
                let mut rng = SeededRng::seed_from_u64(0);
                sent_loss(params, &layout, &cfg, &batch, &SoftmaxMode::Full, &mut rng)
                    .unwrap()
                    .loss
            },
            &m.params,
            &out.grad,
        );
        assert!(
            res.max_rel_err < 1e-4,
            "rel err {} at {} ({} vs {})",
            res.max_rel_err,
            res.worst_index,
            res.analytic,
            res.numeric
        );
    }

    #[test]
    fn without_layer_norm_gradient_still_matches() {
        let mut cfg = tiny_cfg();
        cfg.layer_norm = false;
        let mut rng = SeededRng::seed_from_u64(13);
        let mut m = SentModel::init(cfg, tiny_vocab(5), &mut rng).unwrap();
        // a generic point: init-scale weights leave the gates so inert that
        // their true gradients sit below finite-difference noise
        for p in &mut m.params {
            *p = rng.random_range(-0.6..0.6);
        }
        m.params[m.layout.head_bias] = -1.0;
        let batch = tiny_batch();
        let mut r0 = SeededRng::seed_from_u64(0);
        let out = sent_loss(&m.params, &m.layout, &m.cfg, &batch, &SoftmaxMode::Full, &mut r0).unwrap();
        let layout = m.layout.clone();
        let cfg = m.cfg.clone();
        let res = check_gradient(
            |params| {
                let mut rng = SeededRng::seed_from_u64(0);
                sent_loss(params, &layout, &cfg, &batch, &SoftmaxMode::Full, &mut rng)
                    .unwrap()
                    .loss
            },
            &m.params,
            &out.grad,
        );
        assert!(res.max_rel_err < 1e-4, "rel err {}", res.max_rel_err);
    }

    #[test]
    fn explicit_full_candidates_match_full_mode() {
        let m = tiny_model(5);
        let batch = tiny_batch();
        let all: Vec<u32> = (0..5).collect();
        let lists: Vec<Vec<u32>> = (0..8).map(|_| all.clone()).collect();
        let mut r1 = SeededRng::seed_from_u64(0);
        let full = sent_loss(&m.params, &m.layout, &m.cfg, &batch, &SoftmaxMode::Full, &mut r1).unwrap();
        let mut r2 = SeededRng::seed_from_u64(0);
        let expl =
            sent_loss(&m.params, &m.layout, &m.cfg, &batch, &SoftmaxMode::Explicit(lists), &mut r2).unwrap();
        assert!((full.loss - expl.loss).abs() < 1e-12);
        for (a, b) in full.grad.iter().zip(&expl.grad) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_mode_gradient_matches_finite_differences() {
        // Explicit candidate lists make the sampled code path deterministic.
        let m = tiny_model(17);
        let batch = vec![IdTriple { prev: vec![1, 3], mid: vec![0, 2], next: vec![4] }];
        let lists = vec![vec![1, 0, 4], vec![3, 2, 0], vec![4, 4, 1]];
        let mut r0 = SeededRng::seed_from_u64(0);
        let out = sent_loss(
            &m.params,
            &m.layout,
            &m.cfg,
            &batch,
            &SoftmaxMode::Explicit(lists.clone()),
            &mut r0,
        )
        .unwrap();
        let layout = m.layout.clone();
        let cfg = m.cfg.clone();
        let res = check_gradient(
            |params| {
                let mut rng = SeededRng::seed_from_u64(0);
                sent_loss(params, &layout, &cfg, &batch, &SoftmaxMode::Explicit(lists.clone()), &mut rng)
                    .unwrap()
                    .loss
            },
            &m.params,
            &out.grad,
        );
        assert!(res.max_rel_err < 1e-4, "rel err {}", res.max_rel_err);
    }

    #[test]
    fn swapping_directions_and_head_halves_is_a_symmetry() {
        // Running the reversed sentence through a model with fwd/bwd GRU
        // groups swapped and the heads' half-rows swapped must give the
        // same ball point.
        let m = tiny_model(23);
        let layout = &m.layout;
        let (d_e, d_h, d) = (layout.d_e, layout.d_h, layout.d);
        let mut swapped = m.params.clone();
        // swap GRU weight groups
        for gate in 0..3 {
            let spans = [
                (layout.gru[0].w[gate], layout.gru[1].w[gate], d_h * d_e),
                (layout.gru[0].u[gate], layout.gru[1].u[gate], d_h * d_h),
                (layout.gru[0].b[gate], layout.gru[1].b[gate], d_h),
            ];
            for (a, b, len) in spans {
                for i in 0..len {
                    swapped.swap(a + i, b + i);
                }
            }
        }
        if let Some(ln) = &layout.ln {
            for gate in 0..3 {
                for i in 0..d_h {
                    swapped.swap(ln[0].gain[gate] + i, ln[1].gain[gate] + i);
                    swapped.swap(ln[0].bias[gate] + i, ln[1].bias[gate] + i);
                }
            }
        }
        // swap the head rows that consume the two encoder halves
        for i in 0..d_h {
            for k in 0..d {
                swapped.swap(layout.head_dir + i * d + k, layout.head_dir + (i + d_h) * d + k);
            }
            swapped.swap(layout.head_norm + i, layout.head_norm + i + d_h);
        }
        let ids = [0u32, 3, 1, 4];
        let rev: Vec<u32> = ids.iter().rev().copied().collect();
        let a = encode_ids(&m.params, layout, &ids).unwrap();
        let b = encode_ids(&swapped, layout, &rev).unwrap();
        for (x, y) in a.realized.point.iter().zip(&b.realized.point) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn single_token_neighbors_skip_the_context_term() {
        let m = tiny_model(29);
        let batch = vec![IdTriple { prev: vec![2], mid: vec![0, 1], next: vec![3] }];
        let mut rng = SeededRng::seed_from_u64(0);
        let out = sent_loss(&m.params, &m.layout, &m.cfg, &batch, &SoftmaxMode::Full, &mut rng).unwrap();
        assert_eq!(out.empty_contexts, 2);
        assert!(out.loss.is_finite());
    }

    fn toy_sentences() -> Vec<Vec<String>> {
        // cyclic patterned text so neighbor prediction is learnable
        let patterns = [
            "the cat sat on the mat",
            "a dog ran in the park",
            "the cat ate a fish",
            "a dog bit the ball",
            "the bird flew over trees",
            "a fish swam in water",
        ];
        (0..30)
            .map(|i| {
                patterns[i % patterns.len()]
                    .split_whitespace()
                    .map(str::to_string)
                    .collect()
            })
            .collect()
    }

    #[test]
    fn training_reduces_loss_and_tracks_lambdas() {
        let cfg = SentConfig {
            hidden_dim: 3,
            word_dim: 6,
            ball_dim: 4,
            epochs: 3,
            batch_size: 8,
            lr: 0.02,
            seed: 5,
            holdout_frac: 0.2,
            ..Default::default()
        };
        let run = train_sent(&toy_sentences(), &cfg).unwrap();
        assert_eq!(run.epochs.len(), 3);
        assert!(run.epochs[2].loss < run.epochs[0].loss);
        let last = run.epochs.last().unwrap();
        assert!(last.lambda1 > 0.0 && last.lambda2 > 0.0);
        assert!(run.untrained_perplexity.unwrap() > 1.0);
        assert!(last.holdout_perplexity.unwrap().is_finite());
    }

    #[test]
    fn training_is_bit_deterministic() {
        let cfg = SentConfig {
            hidden_dim: 2,
            word_dim: 4,
            ball_dim: 3,
            epochs: 2,
            batch_size: 8,
            seed: 9,
            holdout_frac: 0.0,
            ..Default::default()
        };
        let a = train_sent(&toy_sentences(), &cfg).unwrap();
        let b = train_sent(&toy_sentences(), &cfg).unwrap();
        for (x, y) in a.model.params.iter().zip(&b.model.params) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn context_average_uses_fixed_divisor() {
        // c for the first token of [a, b, c] with K=2 must be (v_b + v_c)/4.
        let m = tiny_model(31);
        let layout = &m.layout;
        let sent = [0u32, 1, 2];
        let t = 0usize;
        let k = m.cfg.context_window;
        let mut expect = vec![0.0; layout.d_e];
        for id in [1u32, 2] {
            let row = layout.emb_in_row(id);
            for (j, v) in m.params[row].iter().enumerate() {
                expect[j] += v / (2 * k) as f64;
            }
        }
        // reproduce the loss code's window logic
        let mut ctx_ids: Vec<u32> = Vec::new();
        for off in 1..=k {
            if t >= off {
                ctx_ids.push(sent[t - off]);
            }
            if t + off < sent.len() {
                ctx_ids.push(sent[t + off]);
            }
        }
        assert_eq!(ctx_ids, vec![1, 2]);
        let mut got = vec![0.0; layout.d_e];
        for id in &ctx_ids {
            let row = layout.emb_in_row(*id);
            for (j, v) in m.params[row].iter().enumerate() {
                got[j] += v / (2 * k) as f64;
            }
        }
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
