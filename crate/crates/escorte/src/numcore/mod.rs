//! Dense-matrix numerics with reverse-mode gradients.
//!
//! Everything learned in this crate — the embedding head, the transformer
//! layers, the attention pool, both losses — is expressed over [`Matrix`]
//! values and differentiated by recording primitive operations on a
//! [`Tape`]. All arithmetic is 64-bit; models are tiny, so determinism and
//! tight gradient-check tolerances matter more than speed.

mod checkpoint;
mod gradcheck;
mod matrix;
mod optim;
mod rng;
mod tape;

pub use checkpoint::{Checkpoint, CheckpointError, CKPT_MAGIC};
pub use gradcheck::grad_check;
pub use matrix::{Matrix, NumError};
pub use optim::{AdamConfig, AdamState};
pub use rng::Rng;
pub use tape::{NodeId, Tape};
