//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper takes a `parallel` switch so callers (and the benches) can
//! pick the execution strategy at runtime. Without the `parallel` feature the
//! switch is ignored and everything runs on the calling thread. Output order
//! always follows input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
use crate::Error;
use crate::Result;

/// Maps `f` over `0..n`, collecting results in index order.
pub fn map_range<R, F>(n: usize, parallel: bool, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..n).map(f).collect()
}

/// Maps `f` over a slice, collecting results in slice order.
pub fn map_slice<T, R, F>(items: &[T], parallel: bool, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    map_range(items.len(), parallel, |i| f(i, &items[i]))
}

/// Runs `f` over a slice on a dedicated pool of `threads` workers.
///
/// `threads <= 1` (or a build without the `parallel` feature) runs
/// sequentially. Errors short-circuit; the first error in input order wins
/// for the sequential path.
pub fn try_map_with_threads<T, R, F>(items: &[T], threads: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> Result<R> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::ThreadPool(e.to_string()))?;
        return pool.install(|| {
            items
                .par_iter()
                .enumerate()
                .map(|(i, x)| f(i, x))
                .collect::<Result<Vec<R>>>()
        });
    }
    let _ = threads;
    items.iter().enumerate().map(|(i, x)| f(i, x)).collect()
}

/// Whether this build can actually run in parallel.
pub const fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    #[test]
    fn order_is_preserved_both_ways() {
        let seq = map_range(1000, false, |i| i * i);
        let par = map_range(1000, true, |i| i * i);
        assert_eq!(seq, par);
        assert_eq!(seq[31], 961);
    }

    #[test]
    fn thread_pool_errors_propagate() {
        let items: Vec<usize> = (0..50).collect();
        let r = try_map_with_threads(&items, 4, |_, &x| {
            if x == 17 {
                Err(Error::InvalidArgument("boom".into()))
            } else {
                Ok(x)
            }
        });
        assert!(r.is_err());
        let ok = try_map_with_threads(&items, 4, |_, &x| Ok(x + 1)).unwrap();
        assert_eq!(ok, (1..51).collect::<Vec<_>>());
    }
}
