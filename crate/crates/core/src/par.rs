//! Data-parallel iteration helpers.
//!
//! With the `parallel` feature these dispatch to rayon; without it they fall
//! back to the sequential std iterators. Every call site only uses ordered
//! `map`/`collect` so results are bitwise identical in both modes and for any
//! thread count. Reductions are always done sequentially on collected values.

#[cfg(feature = "parallel")]
pub use rayon::prelude::*;

/// Minimum chunk length handed to a worker; keeps tiny loops sequential.
pub const MIN_LEN: usize = 256;

/// Maps `f` over `0..n` and collects the results in index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().with_min_len(MIN_LEN).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps `f` over a slice and collects the results in order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().with_min_len(MIN_LEN).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Like [`map_slice`] but without a minimum chunk length, for a handful of
/// expensive independent jobs (solves at different parameters).
pub fn map_jobs<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
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

/// Writes `f(i)` into `out[i]` for every index.
pub fn fill<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        out.par_iter_mut()
            .with_min_len(MIN_LEN)
            .enumerate()
            .for_each(|(i, slot)| *slot = f(i));
    }
    #[cfg(not(feature = "parallel"))]
    {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = f(i);
        }
    }
}

/// Sequential, fixed-order sum. Used for every reduction so that parallel
/// and sequential builds agree to the last bit.
pub fn ordered_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().fold(0.0, |acc, v| acc + v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_preserves_order() {
        let v = map_range(10_000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }

    #[test]
    fn fill_writes_every_slot() {
        let mut out = vec![0usize; 1000];
        fill(&mut out, |i| i + 1);
        assert_eq!(out[999], 1000);
        assert_eq!(out[0], 1);
    }
}
