//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) these run on the rayon global
//! pool; without it they fall back to plain iterators. Results are always
//! returned in index order, so callers see identical output either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`.
#[cfg(feature = "parallel")]
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Maps a fallible `f` over `0..n`, returning the first error by index order
/// in the sequential build and some error in the parallel build.
#[cfg(feature = "parallel")]
pub fn try_map_range<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn try_map_range<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Maps `f` over a slice.
#[cfg(feature = "parallel")]
pub fn map_slice<'a, S, T, F>(items: &'a [S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&'a S) -> T + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<'a, S, T, F>(items: &'a [S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&'a S) -> T + Sync + Send,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn try_map_slice<'a, S, T, E, F>(items: &'a [S], f: F) -> Result<Vec<T>, E>
where
    S: Sync,
    T: Send,
    E: Send,
    F: Fn(&'a S) -> Result<T, E> + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn try_map_slice<'a, S, T, E, F>(items: &'a [S], f: F) -> Result<Vec<T>, E>
where
    S: Sync,
    T: Send,
    E: Send,
    F: Fn(&'a S) -> Result<T, E> + Sync + Send,
{
    items.iter().map(f).collect()
}
