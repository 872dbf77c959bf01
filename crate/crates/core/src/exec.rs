//! Data-parallel execution of independent per-index work.
//!
//! Every kernel in the crate that is parallel over outputs (sample points,
//! lattice indices, Green's function columns, packet pairs) goes through
//! [`map_range`]. Each output slot is computed by exactly one closure call
//! with a fixed internal summation order, and results are collected in index
//! order, so the numbers are bitwise identical for any worker count and for
//! the sequential fallback.
//!
//! With the `parallel` feature disabled, [`Execution::Parallel`] silently
//! degrades to sequential execution.

use std::sync::atomic::{AtomicU8, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How [`map_range`] schedules work.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

const SEQUENTIAL: u8 = 0;
const PARALLEL: u8 = 1;

static MODE: AtomicU8 = AtomicU8::new(PARALLEL);

/// Process-wide execution mode (parallel unless changed).
pub fn mode() -> Execution {
    match MODE.load(Ordering::Relaxed) {
        SEQUENTIAL => Execution::Sequential,
        _ => Execution::Parallel,
    }
}

pub fn set_mode(mode: Execution) {
    let v = match mode {
        Execution::Sequential => SEQUENTIAL,
        Execution::Parallel => PARALLEL,
    };
    MODE.store(v, Ordering::Relaxed);
}

/// True when the crate was built with rayon support.
pub const fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}

/// Evaluates `f(0), …, f(n-1)` and returns the results in index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode() {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Runs `f` on a dedicated pool of `workers` threads.
///
/// Used by the determinism audits and the CLI `--threads` flag. Without the
/// `parallel` feature the closure simply runs on the calling thread.
pub fn with_workers<R, F>(workers: usize, f: F) -> R
where
    R: Send,
    F: FnOnce() -> R + Send,
{
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .expect("failed to build worker pool");
        pool.install(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        f()
    }
}
