//! Pluggable execution of independent, indexed work items.
//!
//! Library routines hand their independent pieces (tensor chunks, sample
//! blocks, rank tests) to an [`Executor`]; results always come back in index
//! order, so output never depends on how the work was scheduled.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluates `f(0), ..., f(len - 1)` and returns the results in order.
    fn map_indexed<R, F>(&self, len: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync;
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl Executor for Serial {
    fn map_indexed<R, F>(&self, len: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync,
    {
        (0..len).map(f).collect()
    }
}
