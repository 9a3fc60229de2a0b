//! Poincare-ball geometry: distance, its gradient, and the sigmoid-norm
//! re-parameterization that keeps every point strictly inside the ball.
//!
//! Points live in the open unit ball `B^d = { x : ||x|| < 1 }` with curvature
//! -1. Distances follow Nickel & Kiela (2017):
//!
//! ```text
//! d(u, v) = arcosh(1 + 2 ||u - v||^2 / ((1 - ||u||^2)(1 - ||v||^2)))
//! ```
//!
//! Instead of storing ball coordinates directly (which would need a
//! projection step after every update), an embedding is stored as raw
//! parameters `(dir_raw in R^d, norm_raw in R)` and realized as
//!
//! ```text
//! theta = sigmoid(norm_raw) * dir_raw / ||dir_raw||
//! ```
//!
//! so unconstrained optimizers can never push a point out of the ball. All
//! geometry runs in f64; checkpoints round to f32 on serialization.

use rand::Rng;

use crate::error::{Error, Result};

/// Realized norms are clamped to `1 - BALL_EPS`.
pub const BALL_EPS: f64 = 1e-5;

/// Pairs with squared separation below this have no usable distance gradient.
pub const SEP_EPS: f64 = 1e-9;

/// Raw directions with norm below this cannot be normalized.
pub const DIR_EPS: f64 = 1e-12;

/// A point strictly inside the unit ball, dimension >= 2.
#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint {
    coords: Vec<f64>,
}

impl BallPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "ball dimension must be >= 2, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(
                "non-finite coordinate in ball point".into(),
            ));
        }
        let n = norm(&coords);
        if n >= 1.0 {
            return Err(Error::InvalidInput(format!(
                "point must lie strictly inside the unit ball, norm = {n}"
            )));
        }
        Ok(Self { coords })
    }

    pub fn origin(dim: usize) -> Self {
        assert!(dim >= 2, "ball dimension must be >= 2");
        Self {
            coords: vec![0.0; dim],
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Euclidean norm of the coordinates, always < 1.
    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }

    /// Distance from the origin, `2 atanh(||x||)`.
    pub fn hyperbolic_norm(&self) -> f64 {
        2.0 * self.norm().atanh()
    }
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm_sq(u: &[f64]) -> f64 {
    dot(u, u)
}

pub(crate) fn norm(u: &[f64]) -> f64 {
    norm_sq(u).sqrt()
}

fn dist_sq(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Hyperbolic distance on raw coordinate slices. Callers guarantee both
/// slices have equal length and norms < 1 (true for any `BallPoint` and for
/// anything produced by `reparam`).
pub(crate) fn poincare_dist_slices(u: &[f64], v: &[f64]) -> f64 {
    let du2 = dist_sq(u, v);
    let au = 1.0 - norm_sq(u);
    let av = 1.0 - norm_sq(v);
    // Rounding can push the argument a hair below 1; acosh would return NaN.
    let gamma = (1.0 + 2.0 * du2 / (au * av)).max(1.0);
    gamma.acosh()
}

pub(crate) fn euclidean_dist_slices(u: &[f64], v: &[f64]) -> f64 {
    dist_sq(u, v).sqrt()
}

/// Gradient of the hyperbolic distance with respect to both endpoints.
/// Errors with `DegeneratePair` when the squared separation is below
/// `SEP_EPS`; training loops treat that as a zero-gradient pair.
pub(crate) fn poincare_dist_grad_slices(u: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let du2 = dist_sq(u, v);
    if du2 < SEP_EPS {
        return Err(Error::DegeneratePair);
    }
    let au = 1.0 - norm_sq(u);
    let av = 1.0 - norm_sq(v);
    let gamma = 1.0 + 2.0 * du2 / (au * av);
    // gamma - 1 >= 2 * SEP_EPS here, so the arcosh derivative is finite.
    let denom = (gamma * gamma - 1.0).sqrt();
    let cu = 4.0 / (au * av * denom);
    let gu = u
        .iter()
        .zip(v)
        .map(|(a, b)| cu * ((a - b) + a * du2 / au))
        .collect();
    let gv = v
        .iter()
        .zip(u)
        .map(|(a, b)| cu * ((a - b) + a * du2 / av))
        .collect();
    Ok((gu, gv))
}

pub(crate) fn euclidean_dist_grad_slices(u: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let du2 = dist_sq(u, v);
    if du2 < SEP_EPS {
        return Err(Error::DegeneratePair);
    }
    let d = du2.sqrt();
    let gu: Vec<f64> = u.iter().zip(v).map(|(a, b)| (a - b) / d).collect();
    let gv = gu.iter().map(|g| -g).collect();
    Ok((gu, gv))
}

/// Fused distance + gradient into caller scratch; shares the norm work the
/// training loop would otherwise do twice. Returns `(distance, degenerate)`;
/// on a degenerate pair the gradients are zeroed and the distance is still
/// valid.
pub(crate) fn dist_and_grad_into(
    metric: Metric,
    u: &[f64],
    v: &[f64],
    gu: &mut [f64],
    gv: &mut [f64],
) -> (f64, bool) {
    let du2 = dist_sq(u, v);
    match metric {
        Metric::Hyperbolic => {
            let au = 1.0 - norm_sq(u);
            let av = 1.0 - norm_sq(v);
            let gamma = (1.0 + 2.0 * du2 / (au * av)).max(1.0);
            let d = gamma.acosh();
            if du2 < SEP_EPS {
                gu.fill(0.0);
                gv.fill(0.0);
                return (d, true);
            }
            let denom = (gamma * gamma - 1.0).sqrt();
            let c = 4.0 / (au * av * denom);
            for i in 0..u.len() {
                gu[i] = c * ((u[i] - v[i]) + u[i] * du2 / au);
                gv[i] = c * ((v[i] - u[i]) + v[i] * du2 / av);
            }
            (d, false)
        }
        Metric::Euclidean => {
            let d = du2.sqrt();
            if du2 < SEP_EPS {
                gu.fill(0.0);
                gv.fill(0.0);
                return (d, true);
            }
            for i in 0..u.len() {
                gu[i] = (u[i] - v[i]) / d;
                gv[i] = -gu[i];
            }
            (d, false)
        }
    }
}

/// Which distance the training loss uses. Everything else (the
/// re-parameterization, sampling, the loop) is identical code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Hyperbolic,
    Euclidean,
}

impl Metric {
    pub fn dist(self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            Metric::Hyperbolic => poincare_dist_slices(u, v),
            Metric::Euclidean => euclidean_dist_slices(u, v),
        }
    }

    pub fn dist_grad(self, u: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        match self {
            Metric::Hyperbolic => poincare_dist_grad_slices(u, v),
            Metric::Euclidean => euclidean_dist_grad_slices(u, v),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::Hyperbolic => write!(f, "hyperbolic"),
            Metric::Euclidean => write!(f, "euclidean"),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hyperbolic" => Ok(Metric::Hyperbolic),
            "euclidean" => Ok(Metric::Euclidean),
            other => Err(Error::Config(format!(
                "unknown metric {other:?}, expected hyperbolic or euclidean"
            ))),
        }
    }
}

/// Hyperbolic distance between two ball points.
pub fn poincare_distance(u: &BallPoint, v: &BallPoint) -> f64 {
    assert_eq!(u.dim(), v.dim(), "dimension mismatch");
    poincare_dist_slices(u.coords(), v.coords())
}

/// Gradient of `poincare_distance` with respect to both points.
pub fn poincare_distance_grad(u: &BallPoint, v: &BallPoint) -> Result<(Vec<f64>, Vec<f64>)> {
    assert_eq!(u.dim(), v.dim(), "dimension mismatch");
    poincare_dist_grad_slices(u.coords(), v.coords())
}

/// Cosine distance `1 - <u,v> / (||u|| ||v||)`; errors on a zero-norm input.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::InvalidInput(
            "cosine distance undefined for a zero-norm input".into(),
        ));
    }
    Ok(1.0 - dot(u, v) / (nu * nv))
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A raw row `(dir_raw[0..d], norm_raw)` realized as a ball point, with the
/// intermediates the backward pass needs.
#[derive(Debug, Clone)]
pub struct Realized {
    pub point: Vec<f64>,
    pub unit_dir: Vec<f64>,
    /// Norm actually used for the point (sigmoid, clamped to 1 - BALL_EPS).
    pub radius: f64,
    sigma: f64,
    dir_norm: f64,
    clamped: bool,
    /// Direction was degenerate and replaced by a random unit vector; the
    /// direction part then carries no gradient.
    pub reinit_dir: bool,
}

/// Realize a raw row. Errors with `DegenerateDirection` when the raw
/// direction is too short to normalize; use `reparam_train` where a random
/// fallback is acceptable.
pub fn reparam(raw: &[f64]) -> Result<Realized> {
    let d = raw.len() - 1;
    assert!(d >= 2, "ball dimension must be >= 2");
    let dir_norm = norm(&raw[..d]);
    if dir_norm < DIR_EPS {
        return Err(Error::DegenerateDirection);
    }
    Ok(realize(raw, dir_norm, false))
}

/// Training-time realization: a degenerate direction is replaced in place by
/// a fresh random unit vector (drawn from `rng`) and flagged so the backward
/// pass sends no gradient into the direction.
pub fn reparam_train(raw: &mut [f64], rng: &mut impl Rng) -> Realized {
    let d = raw.len() - 1;
    assert!(d >= 2, "ball dimension must be >= 2");
    let mut dir_norm = norm(&raw[..d]);
    let mut reinit = false;
    if dir_norm < DIR_EPS {
        log::warn!("degenerate raw direction, re-initializing to a random unit vector");
        loop {
            for c in raw[..d].iter_mut() {
                *c = rng.random_range(-1.0..1.0);
            }
            dir_norm = norm(&raw[..d]);
            if dir_norm >= 1e-3 {
                break;
            }
        }
        let inv = 1.0 / dir_norm;
        for c in raw[..d].iter_mut() {
            *c *= inv;
        }
        dir_norm = 1.0;
        reinit = true;
    }
    realize(raw, dir_norm, reinit)
}

fn realize(raw: &[f64], dir_norm: f64, reinit_dir: bool) -> Realized {
    let d = raw.len() - 1;
    let sigma = sigmoid(raw[d]);
    let clamped = sigma > 1.0 - BALL_EPS;
    let radius = if clamped { 1.0 - BALL_EPS } else { sigma };
    let unit_dir: Vec<f64> = raw[..d].iter().map(|c| c / dir_norm).collect();
    let point = unit_dir.iter().map(|c| c * radius).collect();
    Realized {
        point,
        unit_dir,
        radius,
        sigma,
        dir_norm,
        clamped,
        reinit_dir,
    }
}

/// Chain an upstream gradient on the realized point back to the raw row,
/// accumulating into `out` (length d+1, layout `(dir_raw, norm_raw)`).
///
/// The norm path is cut when the sigmoid was clamped (the forward pass is
/// locally constant there), and the direction path is cut when the direction
/// was re-initialized.
pub fn reparam_grad(r: &Realized, upstream: &[f64], out: &mut [f64]) {
    let d = upstream.len();
    debug_assert_eq!(out.len(), d + 1);
    let vdot = dot(&r.unit_dir, upstream);
    if !r.reinit_dir {
        let scale = r.radius / r.dir_norm;
        for i in 0..d {
            out[i] += scale * (upstream[i] - r.unit_dir[i] * vdot);
        }
    }
    if !r.clamped {
        out[d] += r.sigma * (1.0 - r.sigma) * vdot;
    }
}
