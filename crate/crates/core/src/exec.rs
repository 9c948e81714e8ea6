//! Fan-out of independent runs: rayon when the `parallel` feature is on,
//! a plain loop otherwise. Results always come back in input order.

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "PLATE_INTERPEN_THREADS";

/// Worker count requested through [`THREADS_ENV`], if any.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse::<usize>().ok().filter(|n| *n > 0)
}

pub fn seq_map<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    match thread_cap() {
        Some(1) => seq_map(items, f),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
            Err(_) => seq_map(items, f),
        },
        None => items.par_iter().map(&f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    seq_map(items, f)
}
