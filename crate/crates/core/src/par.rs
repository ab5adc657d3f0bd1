//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature enabled, work items are distributed over the
//! rayon pool unless the caller asks for sequential execution. Every call site
//! derives its random streams from item indices, so the result does not depend
//! on the execution mode or the thread count.

/// Runtime execution mode. Without the `parallel` feature every mode runs
/// sequentially.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

pub fn map_indexed<T, R, F>(items: &[T], mode: Execution, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode == Execution::Parallel {
        use rayon::prelude::*;
        return items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect();
    }
    let _ = mode;
    items.iter().enumerate().map(|(i, x)| f(i, x)).collect()
}

pub fn map_range<R, F>(n: usize, mode: Execution, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode == Execution::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}
