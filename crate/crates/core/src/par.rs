//! Per-particle iteration that runs on the rayon pool when the `parallel`
//! feature is enabled. Every closure receives its particle index, so results
//! never depend on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Calls `f(j, state_j, cache_j, params_j, out_j)` for every particle, where
/// the slices are consecutive chunks of the given strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn for_each_particle<R, F>(
    states: &mut [f64],
    d: usize,
    cache: &mut [f64],
    c: usize,
    params: &mut [f64],
    p: usize,
    out: &mut [R],
    f: F,
) where
    R: Send,
    F: Fn(usize, &mut [f64], &mut [f64], &mut [f64], &mut R) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    states
        .par_chunks_mut(d)
        .zip(cache.par_chunks_mut(c))
        .zip(params.par_chunks_mut(p))
        .zip(out.par_iter_mut())
        .enumerate()
        .for_each(|(j, (((x, cj), pj), o))| f(j, x, cj, pj, o));
    #[cfg(not(feature = "parallel"))]
    states
        .chunks_mut(d)
        .zip(cache.chunks_mut(c))
        .zip(params.chunks_mut(p))
        .zip(out.iter_mut())
        .enumerate()
        .for_each(|(j, (((x, cj), pj), o))| f(j, x, cj, pj, o));
}

/// Maps `f` over `0..n`, preserving order.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return (0..n).into_par_iter().map(f).collect();
    #[cfg(not(feature = "parallel"))]
    return (0..n).map(f).collect();
}
