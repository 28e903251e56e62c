//! Execution mode for the data-parallel stages.
//!
//! Every parallel code path in the crate produces results identical to its
//! sequential counterpart. Without the `parallel` feature both modes run on
//! the calling thread.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// Number of worker threads the mode will use.
    pub fn threads(self) -> usize {
        match self {
            Parallelism::Sequential => 1,
            #[cfg(feature = "parallel")]
            Parallelism::Parallel => rayon::current_num_threads(),
            #[cfg(not(feature = "parallel"))]
            Parallelism::Parallel => 1,
        }
    }
}

/// Maps `f` over `items`, preserving order.
pub(crate) fn map_slice<T, R, F>(items: &[T], mode: Parallelism, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Maps `f` over `0..n`, preserving order.
pub(crate) fn map_range<R, F>(n: usize, mode: Parallelism, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Parallelism::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}
