//! Index-ordered map over independent work items.
//!
//! With the `parallel` feature (default) items are spread over a rayon pool;
//! without it, or with [`Parallelism::Sequential`], they run in order on the
//! calling thread. Results are always returned in index order, so aggregation
//! downstream does not depend on scheduling.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Parallelism {
    Sequential,
    /// The global rayon pool.
    #[default]
    Auto,
    /// A dedicated pool with this many threads.
    Threads(usize),
}

impl Parallelism {
    /// `0` → auto, `1` → sequential, `n` → n threads.
    pub fn from_count(n: usize) -> Self {
        match n {
            0 => Parallelism::Auto,
            1 => Parallelism::Sequential,
            n => Parallelism::Threads(n),
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self != Parallelism::Sequential
    }
}

/// Evaluates `f(0..n)` and collects the results in index order.
pub fn map_indexed<T, F>(n: usize, parallelism: Parallelism, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        match parallelism {
            Parallelism::Sequential => {}
            Parallelism::Auto => return (0..n).into_par_iter().map(f).collect(),
            Parallelism::Threads(threads) => {
                match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                    Ok(pool) => return pool.install(|| (0..n).into_par_iter().map(&f).collect()),
                    Err(e) => log::warn!("could not build a {threads}-thread pool ({e}); running sequentially"),
                }
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = parallelism;
    (0..n).map(f).collect()
}

/// Like [`map_indexed`] but stops at the first error (lowest index wins).
pub fn try_map_indexed<T, E, F>(n: usize, parallelism: Parallelism, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(n, parallelism, f).into_iter().collect()
}
