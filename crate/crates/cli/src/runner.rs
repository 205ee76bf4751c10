//! Rayon-backed executor injected into the core solvers.

use l1phase_core::exec::Parallelism;
use rayon::prelude::*;

/// Wraps a dedicated thread pool so `--workers` is honored without
/// touching the global pool.
pub struct RayonPool {
    pool: rayon::ThreadPool,
}

impl RayonPool {
    /// `workers = 0` means all cores.
    pub fn new(workers: usize) -> Self {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if workers > 0 {
            builder = builder.num_threads(workers);
        }
        RayonPool {
            pool: builder.build().expect("thread pool construction"),
        }
    }
}

impl Parallelism for RayonPool {
    fn map_collect<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool
            .install(|| (0..n).into_par_iter().map(f).collect())
    }

    fn for_each_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        self.pool.install(|| {
            items
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, item)| f(i, item))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let pool = RayonPool::new(4);
        let out = pool.map_collect(100, |i| i * i);
        for (i, v) in out.iter().enumerate() {
            assert_eq!(*v, i * i);
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let one = RayonPool::new(1);
        let many = RayonPool::new(4);
        let a = one.map_collect(50, |i| (i as f64).sin());
        let b = many.map_collect(50, |i| (i as f64).sin());
        assert_eq!(a, b);
    }
}
