//! Transport-oriented feature aggregation.
//!
//! A variable-size set of feature vectors is pooled into a fixed-size linear
//! Wasserstein embedding by transporting it onto a (trainable) reference set
//! with entropic-regularized optimal transport:
//!
//! * [`transport`] — cost matrices, Sinkhorn-Knopp plans, transport objectives.
//! * [`embedding`] — the embedding `X·P* − Z`, attention intensities and the
//!   per-frequency grouped layout used for speaker-style pooling.
//! * [`oracle`] — exact references: closed-form 1D `W₂²`, exact assignment,
//!   statistics pooling.
//! * [`datagen`] — mixed-Gamma sampling and the toy classification dataset.
//! * [`toytrain`] — a small classifier trained end-to-end through the unrolled
//!   Sinkhorn iteration.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod datagen;
pub mod embedding;
mod error;
pub mod exec;
mod matrix;
pub mod oracle;
pub mod toytrain;
pub mod transport;

pub use error::{Error, Result};
pub use matrix::Matrix;
