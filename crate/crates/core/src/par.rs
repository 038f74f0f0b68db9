//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the helpers use rayon when the caller asks for
//! it; without the feature, or when `parallel` is false, they run in order.
//! Results never depend on the mode: every item is computed independently
//! and collected in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// True when the crate was built with rayon support.
pub const fn available() -> bool {
    cfg!(feature = "parallel")
}

/// `(0..n).map(f).collect()`, optionally in parallel.
pub fn map_range<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..n).map(f).collect()
}

/// Applies `f(index, chunk)` to consecutive `chunk`-sized pieces of `data`.
pub fn for_each_chunk<T, F>(data: &mut [T], chunk: usize, parallel: bool, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = parallel;
    data.chunks_mut(chunk)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

/// Applies `f(index, piece)` to pieces of `data` split at `bounds`
/// (`bounds[0] = 0`, increasing, last equal to `data.len()`).
pub fn for_each_piece<T, F>(data: &mut [T], bounds: &[usize], parallel: bool, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let mut pieces = Vec::with_capacity(bounds.len().saturating_sub(1));
    let mut rest = data;
    for w in bounds.windows(2) {
        let (head, tail) = rest.split_at_mut(w[1] - w[0]);
        pieces.push(head);
        rest = tail;
    }
    #[cfg(feature = "parallel")]
    if parallel {
        pieces
            .into_par_iter()
            .enumerate()
            .for_each(|(i, p)| f(i, p));
        return;
    }
    let _ = parallel;
    pieces.into_iter().enumerate().for_each(|(i, p)| f(i, p));
}
