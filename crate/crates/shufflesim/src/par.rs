//! Data-parallel helpers. With the `parallel` feature (default) these fan
//! out over rayon; without it they fall back to sequential iteration with
//! identical, order-preserving results. The sequential forms are always
//! available for comparison benchmarks.

/// Maps `f` over `0..n` sequentially.
pub fn map_indexed_seq<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}

/// Maps `f` over `0..n` in parallel, preserving index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    map_indexed_seq(n, f)
}

/// Folds `0..n` into per-worker accumulators and merges them. `merge` must be
/// associative; results are independent of the partitioning.
pub fn fold_indexed_seq<A, F, M, I>(n: usize, init: I, fold: F, _merge: M) -> A
where
    I: Fn() -> A,
    F: Fn(A, usize) -> A,
    M: Fn(A, A) -> A,
{
    (0..n).fold(init(), fold)
}

#[cfg(feature = "parallel")]
pub fn fold_indexed<A, F, M, I>(n: usize, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Send + Sync,
    F: Fn(A, usize) -> A + Send + Sync,
    M: Fn(A, A) -> A + Send + Sync,
{
    use rayon::prelude::*;
    (0..n)
        .into_par_iter()
        .fold(&init, |acc, i| fold(acc, i))
        .reduce(&init, merge)
}

#[cfg(not(feature = "parallel"))]
pub fn fold_indexed<A, F, M, I>(n: usize, init: I, fold: F, merge: M) -> A
where
    I: Fn() -> A,
    F: Fn(A, usize) -> A,
    M: Fn(A, A) -> A,
{
    fold_indexed_seq(n, init, fold, merge)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let v = map_indexed(100, |i| i * 2);
        assert_eq!(v, map_indexed_seq(100, |i| i * 2));
    }

    #[test]
    fn fold_matches_sequential() {
        let sum = fold_indexed(1000, || 0u64, |a, i| a + i as u64, |a, b| a + b);
        assert_eq!(sum, 499_500);
    }
}
