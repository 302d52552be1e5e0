//! Data-parallel execution with a sequential fallback.
//!
//! Hot loops (Monte Carlo trials, solver restarts, oracle enumeration) go through
//! [`Exec`]. With the `parallel` feature they run on the rayon pool; without it,
//! or with [`Exec::Sequential`], they run in order on the calling thread. Results
//! are always collected in index order, so output never depends on the mode.

use std::ops::Range;

/// Execution mode for data-parallel loops.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// True when this mode actually fans out work (feature enabled and mode parallel).
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Maps `f` over `range`, returning results in index order.
    pub fn map<T, F>(self, range: Range<u64>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return range.into_par_iter().map(f).collect();
        }
        range.map(f).collect()
    }

    /// Maps `f` over a slice, returning results in slice order.
    pub fn map_slice<S, T, F>(self, items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Folds `range` into per-chunk accumulators and merges them.
    ///
    /// `merge` must be associative and commutative for the result to be
    /// independent of scheduling; all callers use integer or exact sums.
    pub fn fold<A, F, M>(self, range: Range<u64>, init: impl Fn() -> A + Sync + Send, f: F, merge: M) -> A
    where
        A: Send,
        F: Fn(A, u64) -> A + Sync + Send,
        M: Fn(A, A) -> A + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Exec::Parallel {
            use rayon::prelude::*;
            return range.into_par_iter().fold(&init, &f).reduce(&init, &merge);
        }
        #[cfg(not(feature = "parallel"))]
        let _ = merge;
        range.fold(init(), f)
    }
}

/// Runs `f` with parallel loops limited to `threads` workers. Without the
/// `parallel` feature this just calls `f`.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R, String> {
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
        Ok(pool.install(f))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(f())
    }
}
