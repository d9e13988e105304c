//! Worker-count control.
//!
//! The `ELASTMAP_THREADS` environment variable caps the number of workers used
//! by parallel sections. All parallel reductions use a fixed block structure,
//! so results are bit-identical at any worker count.

use std::sync::OnceLock;

static WORKERS: OnceLock<usize> = OnceLock::new();

/// Number of workers parallel sections may use (>= 1).
pub fn worker_count() -> usize {
    *WORKERS.get_or_init(|| {
        let available = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1);
        match std::env::var("ELASTMAP_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
        {
            Some(n) if n >= 1 => n,
            _ => available,
        }
    })
}

/// Runs `f` inside a rayon pool sized by [`worker_count`].
pub fn run_pooled<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .expect("thread pool construction");
    pool.install(f)
}
