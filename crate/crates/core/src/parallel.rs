//! Thread pool sizing. `FAFRAME_THREADS` caps the number of worker threads.

use std::sync::OnceLock;

use rayon::{ThreadPool, ThreadPoolBuilder};

pub const THREADS_ENV: &str = "FAFRAME_THREADS";

static POOL: OnceLock<ThreadPool> = OnceLock::new();

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Shared pool for audits and benchmarks.
pub fn pool() -> &'static ThreadPool {
    POOL.get_or_init(|| {
        let mut builder = ThreadPoolBuilder::new();
        if let Some(n) = thread_cap() {
            builder = builder.num_threads(n);
        }
        builder.build().expect("failed to build thread pool")
    })
}
