//! Data-parallel map with a sequential fallback. With the `parallel` feature
//! off, or `parallel = false` at run time, everything runs on the caller's
//! thread. Output order always matches input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn map<T, R, F>(items: &[T], parallel: bool, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return items.par_iter().map(f).collect();
    }
    let _ = parallel;
    items.iter().map(f).collect()
}

/// Whether `map` can actually run in parallel in this build.
pub const fn available() -> bool {
    cfg!(feature = "parallel")
}
