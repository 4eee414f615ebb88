//! Bounded fork-join executor with a fixed reduction topology.

use rayon::prelude::*;

/// Elements per reduction chunk. Partial sums are taken over fixed chunks and
/// combined left to right, so results do not depend on the worker count.
pub const CHUNK: usize = 512;

pub struct Executor {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor").field("workers", &self.workers).finish()
    }
}

impl Executor {
    pub fn new(workers: usize) -> Self {
        let workers = workers.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("bayesc-worker-{i}"))
            .build()
            .expect("failed to start worker pool");
        Executor { pool, workers }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    /// `f(0..n)` in parallel, results in index order.
    pub fn map<T: Send>(&self, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        if self.workers == 1 {
            return (0..n).map(f).collect();
        }
        self.pool.install(|| (0..n).into_par_iter().with_min_len(16).map(f).collect())
    }

    /// Fill `out` in parallel; `f` receives the element index.
    pub fn fill<T: Send>(&self, out: &mut [T], f: impl Fn(usize, &mut T) + Sync + Send) {
        if self.workers == 1 {
            out.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
            return;
        }
        self.pool.install(|| out.par_iter_mut().with_min_len(16).enumerate().for_each(|(i, x)| f(i, x)));
    }

    /// Apply `f` to consecutive `width`-sized rows of `data` in parallel.
    pub fn rows<T: Send>(&self, data: &mut [T], width: usize, f: impl Fn(usize, &mut [T]) + Sync + Send) {
        if width == 0 {
            return;
        }
        if self.workers == 1 {
            data.chunks_mut(width).enumerate().for_each(|(i, r)| f(i, r));
            return;
        }
        self.pool.install(|| data.par_chunks_mut(width).enumerate().for_each(|(i, r)| f(i, r)));
    }

    /// Deterministic parallel sum of `f(i)` for `i in 0..n`.
    pub fn sum(&self, n: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
        self.sum_chunks(n, |range| range.map(&f).sum())
    }

    /// Deterministic parallel reduction: `chunk_sum` is applied to fixed
    /// ranges of `CHUNK` indices and the partials are added in order.
    pub fn sum_chunks(&self, n: usize, chunk_sum: impl Fn(std::ops::Range<usize>) -> f64 + Sync + Send) -> f64 {
        let chunks = n.div_ceil(CHUNK);
        let partial = |c: usize| chunk_sum(c * CHUNK..((c + 1) * CHUNK).min(n));
        let partials: Vec<f64> = if self.workers == 1 || chunks <= 1 {
            (0..chunks).map(partial).collect()
        } else {
            self.pool.install(|| (0..chunks).into_par_iter().map(partial).collect())
        };
        partials.into_iter().fold(0.0, |a, b| a + b)
    }
}
