//! Data-parallel map helpers. With the `parallel` feature the work is
//! spread over rayon; without it the sequential path below is used.
//! Results come back in index order either way, so downstream reductions
//! are deterministic regardless of the feature.

/// Map `f` over indices `0..count`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed_seq(count, f)
}

/// Sequential reference path, always available (used by the benches to
/// compare against the rayon path).
pub fn map_indexed_seq<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}
