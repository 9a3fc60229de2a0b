//! Optimization plumbing shared by both trainers: Adam (dense and sparse
//! per-row variants), global gradient-norm clipping, and a central-difference
//! gradient checker.
//!
//! The sparse variant keeps one moment pair and step count per embedding row
//! and applies bias correction lazily at the row's own step count, so rows a
//! batch never touches stay bit-identical and cost nothing.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamHyper {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn with_lr(self, lr: f64) -> Self {
        Self { lr, ..self }
    }
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self::new(0.001)
    }
}

/// Dense Adam state over one flat parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One Adam update. An all-zero gradient is a no-op: parameters, moments
    /// and the step count stay bit-identical.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], h: &AdamHyper) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.m.len());
        if grads.iter().all(|g| *g == 0.0) {
            return;
        }
        self.t += 1;
        let bc1 = 1.0 - h.beta1.powi(self.t as i32);
        let bc2 = 1.0 - h.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = h.beta1 * self.m[i] + (1.0 - h.beta1) * g;
            self.v[i] = h.beta2 * self.v[i] + (1.0 - h.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] -= h.lr * mhat / (vhat.sqrt() + h.eps);
        }
    }
}

/// Sparse Adam over a row-major table: per-row moments and step counts.
#[derive(Debug, Clone)]
pub struct RowAdam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: Vec<u64>,
    cols: usize,
}

impl RowAdam {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            m: vec![0.0; rows * cols],
            v: vec![0.0; rows * cols],
            t: vec![0; rows],
            cols,
        }
    }

    /// Update the given rows of `table` in place. Rows must be distinct;
    /// callers pass them sorted by id so the update order (and therefore
    /// every bit of the result) is independent of how gradients were
    /// accumulated. Rows whose gradient is all zero are skipped.
    pub fn step_rows(&mut self, table: &mut [f64], rows: &[(u32, Vec<f64>)], h: &AdamHyper) {
        for (row, grad) in rows {
            debug_assert_eq!(grad.len(), self.cols);
            if grad.iter().all(|g| *g == 0.0) {
                continue;
            }
            let r = *row as usize;
            self.t[r] += 1;
            let bc1 = 1.0 - h.beta1.powi(self.t[r] as i32);
            let bc2 = 1.0 - h.beta2.powi(self.t[r] as i32);
            let base = r * self.cols;
            for i in 0..self.cols {
                let g = grad[i];
                let m = &mut self.m[base + i];
                *m = h.beta1 * *m + (1.0 - h.beta1) * g;
                let v = &mut self.v[base + i];
                *v = h.beta2 * *v + (1.0 - h.beta2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                table[base + i] -= h.lr * mhat / (vhat.sqrt() + h.eps);
            }
        }
    }
}

/// Clip a set of named gradient tensors to a shared global L2 norm, in place.
/// Returns the pre-clip norm. Errors (naming the tensor) on any non-finite
/// component. Applying the clip twice changes nothing.
pub fn clip_by_global_norm(grads: &mut [(&str, &mut [f64])], max_norm: f64) -> Result<f64> {
    assert!(max_norm > 0.0, "max_norm must be positive");
    let mut sq = 0.0;
    for (name, g) in grads.iter() {
        for x in g.iter() {
            if !x.is_finite() {
                return Err(Error::NonFiniteGrad((*name).to_string()));
            }
            sq += x * x;
        }
    }
    let norm = sq.sqrt();
    // The slack keeps the operation idempotent: a clipped set re-measures at
    // max_norm up to rounding and must not be scaled again.
    if norm > max_norm * (1.0 + 1e-9) {
        let scale = max_norm / norm;
        for (_, g) in grads.iter_mut() {
            for x in g.iter_mut() {
                *x *= scale;
            }
        }
    }
    Ok(norm)
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Compare an analytic gradient of `f` at `x` against central differences
/// with per-coordinate step `1e-6 * max(1, |x_i|)`. The relative error uses
/// `max(|analytic|, |numeric|, 1e-5)` as denominator; the floor turns the
/// test into an absolute one for near-zero gradients, whose central
/// differences carry roundoff of about `eps * |f| / h` (~1e-10) that no
/// correct analytic value can match relatively.
pub fn check_gradient<F>(mut f: F, x: &[f64], analytic: &[f64]) -> GradCheck
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(x.len(), analytic.len());
    let mut xs = x.to_vec();
    let mut worst = GradCheck {
        max_rel_err: 0.0,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for i in 0..xs.len() {
        let h = 1e-6 * xs[i].abs().max(1.0);
        let orig = xs[i];
        xs[i] = orig + h;
        let fp = f(&xs);
        xs[i] = orig - h;
        let fm = f(&xs);
        xs[i] = orig;
        let numeric = (fp - fm) / (2.0 * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-5);
        let rel = (analytic[i] - numeric).abs() / denom;
        if rel > worst.max_rel_err {
            worst = GradCheck {
                max_rel_err: rel,
                worst_index: i,
                analytic: analytic[i],
                numeric,
            };
        }
    }
    worst
}
