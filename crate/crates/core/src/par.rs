//! Data-parallel dispatch helpers. With the default `parallel` feature the
//! heavy loops fan out over rayon; without it the same helpers run the same
//! closures sequentially, so results are bit-identical either way. Every
//! helper keeps per-element work independent (no shared accumulators), which
//! is what makes the parallel schedule deterministic.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Run `f(index, chunk)` over consecutive equally sized chunks of `data`.
pub fn for_each_chunk<F>(data: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    debug_assert!(chunk > 0 && data.len() % chunk == 0);
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Order-preserving parallel map over a slice of inputs.
pub fn map_collect<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Order-preserving parallel map over an index range.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
