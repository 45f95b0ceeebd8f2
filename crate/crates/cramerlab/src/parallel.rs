//! Deterministic work splitting.
//!
//! Estimators parallelize over item indices and fold partial results in
//! index order, so the numeric output is a pure function of the inputs
//! and never of the thread count. Thread counts only change wall time.

use rayon::prelude::*;

/// Applies `f` to every index in `0..count`, in parallel, returning the
/// results in index order.
pub fn par_indexed<T, F>(count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

/// Parallel map over index chunks of fixed width, folded sequentially in
/// chunk order. `f` sees (chunk_index, start, len).
pub fn par_chunked<T, A, F, G>(total: u64, chunk: u64, f: F, init: A, fold: G) -> A
where
    T: Send,
    F: Fn(u64, u64, u64) -> T + Sync + Send,
    G: FnMut(A, T) -> A,
{
    assert!(chunk > 0);
    let n_chunks = total.div_ceil(chunk);
    let parts: Vec<T> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * chunk;
            let len = chunk.min(total - start);
            f(c, start, len)
        })
        .collect();
    parts.into_iter().fold(init, fold)
}

/// Builds a scoped thread pool with the requested worker count and runs
/// `job` inside it. Zero means "use the default pool".
pub fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        return job();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool construction");
    pool.install(job)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk_sum(total: u64, chunk: u64) -> f64 {
        par_chunked(
            total,
            chunk,
            |_, start, len| (start..start + len).map(|i| (i as f64).sqrt()).sum::<f64>(),
            0.0,
            |a: f64, b: f64| a + b,
        )
    }

    #[test]
    fn chunked_fold_is_worker_invariant() {
        let base = with_workers(1, || chunk_sum(100_000, 1024));
        let four = with_workers(4, || chunk_sum(100_000, 1024));
        assert_eq!(base.to_bits(), four.to_bits());
    }

    #[test]
    fn par_indexed_preserves_order() {
        let v = par_indexed(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i as u64));
    }
}
