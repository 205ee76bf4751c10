//! Execution abstraction for independent Monte Carlo tasks.
//!
//! Samples and trials are embarrassingly parallel; results are always
//! reduced in index order, so any execution order yields identical output.
//! The core ships only the serial executor; the CLI injects a rayon-backed
//! one through this trait.

use alloc::vec::Vec;

pub trait Parallelism: Sync {
    /// Evaluates `f(0..n)` and returns results in index order.
    fn map_collect<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;

    /// Applies `f(index, item)` to every item, mutating in place.
    fn for_each_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send;
}

/// Runs everything on the calling thread.
#[derive(Clone, Copy, Debug, Default)]
pub struct Serial;

impl Parallelism for Serial {
    fn map_collect<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }

    fn for_each_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        for (i, item) in items.iter_mut().enumerate() {
            f(i, item);
        }
    }
}
