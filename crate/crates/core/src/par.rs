//! Data-parallel helpers. With the `parallel` feature (default) these fan out
//! over the rayon pool; without it they run sequentially. Results are always
//! returned in input order, so output is identical across thread counts.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_range<R, F>(range: Range<usize>, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    range.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<R, F>(range: Range<usize>, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    range.map(f).collect()
}

/// Splits `0..n` into contiguous chunks, folds each chunk with `fold` starting
/// from `init()`, then merges the partial accumulators left to right.
pub fn fold_chunks<A, I, F, M>(n: u64, init: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, u64) + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    const CHUNK: u64 = 1 << 14;
    let chunks = n.div_ceil(CHUNK) as usize;
    let partials = map_range(0..chunks, |c| {
        let mut acc = init();
        let lo = c as u64 * CHUNK;
        let hi = (lo + CHUNK).min(n);
        for i in lo..hi {
            fold(&mut acc, i);
        }
        acc
    });
    partials.into_iter().fold(init(), merge)
}
