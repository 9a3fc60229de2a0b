//! Poincare-ball embeddings for graphs, words, and sentences.
//!
//! The crate learns embeddings in the Poincare ball model by storing
//! unconstrained raw parameters and realizing points as
//! `sigmoid(norm_raw) * dir_raw / ||dir_raw||`, so plain Adam works and no
//! projection step is ever needed.

pub mod ball;
pub mod checkpoint;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod graph;
pub mod optim;
pub mod sent;
pub mod trees;

pub use error::{Error, Result};

/// Deterministic RNG used everywhere a seed appears.
pub type SeededRng = rand_chacha::ChaCha12Rng;
