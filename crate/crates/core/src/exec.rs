//! Pluggable data parallelism.
//!
//! Work that is independent per item (per class, per sample, per frequency
//! group) goes through an [`Executor`]. Results always come back in index
//! order, so reductions over them are independent of the executor used.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluates `f(0), f(1), …, f(n - 1)` and returns the results in index order.
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
