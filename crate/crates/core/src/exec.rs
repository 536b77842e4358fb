//! Switch between rayon and plain iteration for the data-parallel loops.
//!
//! Every parallel loop in the crate goes through [`map_range`], which always
//! returns results in index order, so output does not depend on the mode.
//! Without the `parallel` feature the parallel mode quietly runs sequentially.

use std::sync::atomic::{AtomicBool, Ordering};

static SEQUENTIAL: AtomicBool = AtomicBool::new(false);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    Parallel,
    Sequential,
}

pub fn set_mode(mode: ExecMode) {
    SEQUENTIAL.store(mode == ExecMode::Sequential, Ordering::Relaxed);
}

pub fn mode() -> ExecMode {
    if SEQUENTIAL.load(Ordering::Relaxed) || !cfg!(feature = "parallel") {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    }
}

pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode() == ExecMode::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    map_range(items.len(), |k| f(&items[k]))
}
