//! Deterministic work dispatch.
//!
//! The Monte Carlo loops are embarrassingly parallel, but their results must
//! be bit-identical for any worker count. Two rules make that hold:
//! per-index work is pure (each trial derives its own seed), and reductions
//! run sequentially in index order over ordered intermediates. With the
//! `parallel` feature disabled everything runs on one thread through the
//! same code paths.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Batch size for batched folds; fixed so that batch boundaries never depend
/// on the worker count.
pub const FOLD_BATCH: usize = 8_192;

/// Maps `f` over 0..count preserving index order in the output.
pub fn indexed_map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Sequential reference version of [`indexed_map`]; used by the benchmark
/// suite to compare against the parallel dispatch.
pub fn indexed_map_seq<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}

/// Folds 0..count in fixed-size batches. Each batch accumulates
/// sequentially; batch partials merge in batch order, so the result is
/// bit-identical whatever the worker count.
pub fn batched_fold<A, Make, Step, Merge>(count: usize, make: Make, step: Step, merge: Merge) -> A
where
    A: Send,
    Make: Fn() -> A + Sync + Send,
    Step: Fn(&mut A, usize) + Sync + Send,
    Merge: FnMut(A, A) -> A,
{
    let batches = count.div_ceil(FOLD_BATCH).max(1);
    let partials = indexed_map(batches, |b| {
        let mut acc = make();
        let lo = b * FOLD_BATCH;
        let hi = ((b + 1) * FOLD_BATCH).min(count);
        for i in lo..hi {
            step(&mut acc, i);
        }
        acc
    });
    let mut iter = partials.into_iter();
    let first = iter.next().expect("at least one batch");
    iter.fold(first, merge)
}

/// Runs `f` on a thread pool with the requested number of workers
/// (`None` = the ambient pool). Without the `parallel` feature the worker
/// count is ignored and `f` runs on the calling thread.
pub fn run_with_workers<R, F>(workers: Option<usize>, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        match workers {
            Some(w) => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
                Ok(pool) => pool.install(f),
                Err(_) => f(),
            },
            None => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        f()
    }
}
